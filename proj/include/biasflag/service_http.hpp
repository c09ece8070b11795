#pragma once

#include <charconv>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "biasflag/corpus.hpp"
#include "biasflag/hash.hpp"
#include "biasflag/lexicon.hpp"
#include "biasflag/model.hpp"
#include "biasflag/service.hpp"
#include "httplib.h"
#include "json.hpp"

namespace biasflag {

struct ServiceOptions {
  double threshold = 0.5;
  std::optional<std::string> bearer_token;  // required on every route but /health when set
  std::size_t default_queue_limit = 50;
};

// Content hash of the serialized model.
inline std::string model_version(const Model& m) {
  std::ostringstream os;
  save_model(m, os);
  return to_hex(stable_hash(os.str(), 0));
}

inline std::vector<DocumentPage> pages_from_json(const nlohmann::json& body) {
  const nlohmann::json* list = &body;
  nlohmann::json single;
  if (body.is_object()) {
    if (auto it = body.find("pages"); it != body.end()) {
      list = &*it;
    } else {
      single = nlohmann::json::array({body});
      list = &single;
    }
  }
  if (!list->is_array() || list->empty()) throw ValidationError("expected a non-empty list of pages");
  std::vector<DocumentPage> pages;
  for (const auto& p : *list) {
    if (!p.is_object()) throw ValidationError("page must be an object");
    DocumentPage page;
    page.doc_id = detail::string_field(p, "doc_id");
    auto it = p.find("page_no");
    if (it == p.end() || !it->is_number_integer() || it->get<long long>() < 1)
      throw ValidationError("page_no must be an integer >= 1");
    page.page_no = it->get<int>();
    page.text = clean_text(detail::string_field(p, "text"));
    pages.push_back(std::move(page));
  }
  return pages;
}

// HTTP front of the review queue. All mutations go through the store's single
// writer lock; reads may run concurrently.
class ReviewService {
 public:
  ReviewService(QueueStore& store, std::vector<Model> models, Lexicon lex, ServiceOptions opt = {})
      : store_(store), models_(std::move(models)), lex_(std::move(lex)), opt_(std::move(opt)) {
    if (models_.empty()) throw ConfigError("service needs a general model");
    flag_models_.general = &models_.front();
    for (std::size_t i = 1; i < models_.size(); ++i)
      for (BiasType t : kBiasTypes)
        if (models_[i].head_of(task_of(t))) flag_models_.types[t] = &models_[i];
    if (!is_trained(models_.front())) throw ContractError("model has not been trained");
    version_ = model_version(models_.front());
    routes();
  }

  const std::string& version() const { return version_; }
  httplib::Server& server() { return server_; }

  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }
  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, {{"error", msg}});
  }

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (!opt_.bearer_token) return true;
    if (req.get_header_value("Authorization") == "Bearer " + *opt_.bearer_token) return true;
    send_error(res, 401, "unauthorized");
    return false;
  }

  template <typename F>
  void guarded(const httplib::Request& req, httplib::Response& res, F&& f) {
    if (!authorized(req, res)) return;
    try {
      f();
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 422, std::string("malformed JSON: ") + e.what());
    } catch (const ValidationError& e) {
      send_error(res, 422, e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, e.what());
    } catch (const ContractError& e) {
      send_error(res, 422, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }

  void routes() {
    server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}, {"model_version", version_}});
    });
    server_.Post("/documents", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] {
        const auto pages = pages_from_json(nlohmann::json::parse(req.body));
        auto flags = store_.add_flags(flag_document(flag_models_, pages, lex_, opt_.threshold));
        nlohmann::json out = {{"flags", nlohmann::json::array()}};
        for (const auto& f : flags) out["flags"].push_back(to_json(f));
        send_json(res, 201, out);
      });
    });
    server_.Get("/queue", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] {
        std::size_t limit = opt_.default_queue_limit;
        if (req.has_param("limit")) {
          const auto s = req.get_param_value("limit");
          std::size_t v = 0;
          auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
          if (ec != std::errc{} || p != s.data() + s.size() || v == 0)
            throw ValidationError("limit must be a positive integer");
          limit = v;
        }
        nlohmann::json out = {{"flags", nlohmann::json::array()}};
        for (const auto& f : store_.next_pending(limit)) out["flags"].push_back(to_json(f));
        send_json(res, 200, out);
      });
    });
    server_.Post("/decisions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] {
        const auto d = decision_from_json(nlohmann::json::parse(req.body));
        send_json(res, 200, to_json(store_.decide(d)));
      });
    });
    server_.Get("/stats", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] { send_json(res, 200, to_json(store_.stats())); });
    });
    server_.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] {
        std::ostringstream os;
        store_.export_labels(os);
        res.status = 200;
        res.set_content(os.str(), "application/x-ndjson");
      });
    });
  }

  QueueStore& store_;
  std::vector<Model> models_;
  Lexicon lex_;
  ServiceOptions opt_;
  FlagModels flag_models_;
  std::string version_;
  httplib::Server server_;
};

}  // namespace biasflag
