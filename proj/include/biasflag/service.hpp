#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "biasflag/codes.hpp"
#include "biasflag/common.hpp"
#include "biasflag/corpus.hpp"
#include "biasflag/hash.hpp"
#include "biasflag/labeling.hpp"
#include "biasflag/lexicon.hpp"
#include "biasflag/model.hpp"
#include "json.hpp"

namespace biasflag {

enum class FlagStatus : std::uint8_t { pending, accepted, rejected };

inline std::string_view to_string(FlagStatus s) noexcept {
  switch (s) {
    case FlagStatus::pending: return "pending";
    case FlagStatus::accepted: return "accepted";
    case FlagStatus::rejected: return "rejected";
  }
  return "?";
}

inline std::optional<FlagStatus> parse_flag_status(std::string_view s) noexcept {
  for (auto v : {FlagStatus::pending, FlagStatus::accepted, FlagStatus::rejected})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

enum class Verdict : std::uint8_t { bias, potential_bias, non_bias };

inline std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::bias: return "bias";
    case Verdict::potential_bias: return "potential_bias";
    case Verdict::non_bias: return "non_bias";
  }
  return "?";
}

inline std::optional<Verdict> parse_verdict(std::string_view s) noexcept {
  for (auto v : {Verdict::bias, Verdict::potential_bias, Verdict::non_bias})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct ReviewDecision {
  std::string flag_id;
  Verdict verdict = Verdict::non_bias;
  std::set<BiasType> types;
  std::optional<std::string> comment;
  std::string reviewer_id;
  std::optional<std::string> decided_at;  // client-supplied timestamp

  friend bool operator==(const ReviewDecision&, const ReviewDecision&) = default;
};

struct FlagRecord {
  std::string flag_id;
  std::string doc_id;
  int page_no = 1;
  std::string text;
  std::size_t start = 0;  // sentence span in the cleaned page
  std::size_t end = 0;
  double score = 0.0;
  std::map<BiasType, double> type_scores;
  std::vector<IdentifierMatch> matches;
  FlagStatus status = FlagStatus::pending;
  std::uint64_t created_at = 0;  // store insertion sequence
  std::optional<ReviewDecision> decision;

  friend bool operator==(const FlagRecord&, const FlagRecord&) = default;
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const IdentifierMatch& m) {
  return {{"type", std::string(to_string(m.type))}, {"term", m.term}, {"start", m.start}, {"end", m.end}};
}

inline nlohmann::json to_json(const ReviewDecision& d) {
  nlohmann::json j;
  j["flag_id"] = d.flag_id;
  j["verdict"] = std::string(to_string(d.verdict));
  j["types"] = nlohmann::json::array();
  for (BiasType t : d.types) j["types"].push_back(std::string(to_string(t)));
  j["comment"] = d.comment ? nlohmann::json(*d.comment) : nlohmann::json(nullptr);
  j["reviewer_id"] = d.reviewer_id;
  j["decided_at"] = d.decided_at ? nlohmann::json(*d.decided_at) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const FlagRecord& f) {
  nlohmann::json j;
  j["flag_id"] = f.flag_id;
  j["doc_id"] = f.doc_id;
  j["page_no"] = f.page_no;
  j["text"] = f.text;
  j["start"] = f.start;
  j["end"] = f.end;
  j["score"] = f.score;
  j["type_scores"] = nlohmann::json::object();
  for (const auto& [t, p] : f.type_scores) j["type_scores"][std::string(to_string(t))] = p;
  j["matches"] = nlohmann::json::array();
  for (const auto& m : f.matches) j["matches"].push_back(to_json(m));
  j["status"] = std::string(to_string(f.status));
  j["created_at"] = f.created_at;
  j["decision"] = f.decision ? to_json(*f.decision) : nlohmann::json(nullptr);
  return j;
}

namespace detail {

inline BiasType bias_type_field(const nlohmann::json& v) {
  if (!v.is_string()) throw ValidationError("bias type must be a string");
  auto t = parse_bias_type(v.get<std::string>());
  if (!t) throw ValidationError("unknown bias type '" + v.get<std::string>() + "'");
  return *t;
}

inline std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw ValidationError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

inline std::optional<std::string> opt_string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace detail

// Parses and validates a decision. Bias verdicts must name at least one type.
inline ReviewDecision decision_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("decision must be an object");
  ReviewDecision d;
  d.flag_id = detail::string_field(j, "flag_id");
  const auto v = detail::string_field(j, "verdict");
  auto verdict = parse_verdict(v);
  if (!verdict) throw ValidationError("unknown verdict '" + v + "'");
  d.verdict = *verdict;
  if (auto it = j.find("types"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("types must be an array");
    for (const auto& t : *it) d.types.insert(detail::bias_type_field(t));
  }
  if (d.verdict != Verdict::non_bias && d.types.empty())
    throw ValidationError("a bias verdict needs at least one type");
  d.comment = detail::opt_string_field(j, "comment");
  d.reviewer_id = detail::string_field(j, "reviewer_id");
  if (d.reviewer_id.empty()) throw ValidationError("reviewer_id must not be empty");
  d.decided_at = detail::opt_string_field(j, "decided_at");
  return d;
}

inline FlagRecord flag_from_json(const nlohmann::json& j) {
  FlagRecord f;
  f.flag_id = j.at("flag_id").get<std::string>();
  f.doc_id = j.at("doc_id").get<std::string>();
  f.page_no = j.at("page_no").get<int>();
  f.text = j.at("text").get<std::string>();
  f.start = j.at("start").get<std::size_t>();
  f.end = j.at("end").get<std::size_t>();
  f.score = j.at("score").get<double>();
  for (const auto& [k, v] : j.at("type_scores").items()) f.type_scores[detail::bias_type_field(k)] = v.get<double>();
  for (const auto& m : j.at("matches"))
    f.matches.push_back({detail::bias_type_field(m.at("type")), m.at("term").get<std::string>(),
                         m.at("start").get<std::size_t>(), m.at("end").get<std::size_t>()});
  auto st = parse_flag_status(j.at("status").get<std::string>());
  if (!st) throw ValidationError("bad flag status");
  f.status = *st;
  f.created_at = j.at("created_at").get<std::uint64_t>();
  if (!j.at("decision").is_null()) f.decision = decision_from_json(j.at("decision"));
  return f;
}

// ---------------------------------------------------------------------------
// Flagging
// ---------------------------------------------------------------------------

// The general model plus whatever supplies per-type scores: its own type
// heads (MTL) or separate binary type models.
struct FlagModels {
  const Model* general = nullptr;
  TypeModels types;
};

inline std::string flag_id_for(std::string_view doc_id, int page_no, std::size_t start, std::string_view text) {
  std::string key(doc_id);
  key.push_back('\x1f');
  key += std::to_string(page_no);
  key.push_back('\x1f');
  key += std::to_string(start);
  key.push_back('\x1f');
  key += text;
  return to_hex(stable_hash(key, 0x666c6167ULL));
}

// Segments each page, scores identifier-bearing sentences, and returns a
// pending record for every p > tau. Deterministic in (models, pages, lexicon,
// tau); created_at is left at 0 for the store to assign.
inline std::vector<FlagRecord> flag_document(const FlagModels& models, const std::vector<DocumentPage>& pages,
                                             const Lexicon& lex, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ContractError("threshold must lie in (0, 1)");
  if (!models.general) throw ConfigError("no general model");
  const Model& g = *models.general;
  if (!is_trained(g)) throw ContractError("model has not been trained");
  const auto head = g.head_of(Task::general);
  if (!head) throw ConfigError("model has no general head");
  for (const auto& [t, m] : models.types)
    if (!m || !is_trained(*m)) throw ContractError("type model has not been trained");
  std::vector<FlagRecord> out;
  for (const auto& page : pages) {
    for (const auto& s : segment_sentences(page)) {
      auto matches = find_identifiers(s.text, lex);
      if (matches.empty()) continue;
      const auto scores = forward(g, s.text);
      const double p = scores.probs[*head];
      if (!decide_label(p, tau)) continue;
      FlagRecord f;
      f.doc_id = page.doc_id;
      f.page_no = page.page_no;
      f.text = s.text;
      f.start = s.start;
      f.end = s.end;
      f.flag_id = flag_id_for(f.doc_id, f.page_no, f.start, f.text);
      f.score = p;
      for (BiasType t : kBiasTypes) {
        if (auto v = scores[task_of(t)]) {
          f.type_scores[t] = *v;
        } else if (auto it = models.types.find(t); it != models.types.end()) {
          if (auto w = forward(*it->second, s.text)[task_of(t)]) f.type_scores[t] = *w;
        }
      }
      f.matches = std::move(matches);
      out.push_back(std::move(f));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Queue store
// ---------------------------------------------------------------------------

struct QueueStats {
  std::size_t pending = 0, accepted = 0, rejected = 0;
  std::size_t total() const { return pending + accepted + rejected; }
  friend bool operator==(const QueueStats&, const QueueStats&) = default;
};

inline nlohmann::json to_json(const QueueStats& s) {
  return {{"pending", s.pending}, {"accepted", s.accepted}, {"rejected", s.rejected}, {"total", s.total()}};
}

// Append-only JSONL log, one line per acknowledged mutation, fsync'd before
// the call returns. The flag table is rebuilt by replay on open; a torn final
// line (crash mid-append) is discarded and cut off.
class QueueStore {
 public:
  explicit QueueStore(std::filesystem::path log) : path_(std::move(log)) {
    replay();
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open log " + path_.string() + ": " + std::strerror(errno));
  }
  ~QueueStore() {
    if (fd_ >= 0) ::close(fd_);
  }
  QueueStore(const QueueStore&) = delete;
  QueueStore& operator=(const QueueStore&) = delete;

  const std::filesystem::path& path() const { return path_; }

  // Inserts flags not already present. Returns every input flag as stored.
  std::vector<FlagRecord> add_flags(std::vector<FlagRecord> flags) {
    std::unique_lock lock(mu_);
    nlohmann::json fresh = nlohmann::json::array();
    std::set<std::string> batch;
    for (auto& f : flags) {
      if (table_.count(f.flag_id) || !batch.insert(f.flag_id).second) continue;
      f.status = FlagStatus::pending;
      f.decision.reset();
      f.created_at = seq_ + fresh.size() + 1;
      fresh.push_back(to_json(f));
    }
    if (!fresh.empty()) {
      append({{"op", "flags"}, {"flags", fresh}});
      for (const auto& j : fresh) apply_flag(flag_from_json(j));
    }
    std::vector<FlagRecord> out;
    std::set<std::string> seen;
    for (const auto& f : flags)
      if (seen.insert(f.flag_id).second) out.push_back(table_.at(f.flag_id));
    return out;
  }

  FlagRecord decide(const ReviewDecision& d) {
    if (d.verdict != Verdict::non_bias && d.types.empty())
      throw ValidationError("a bias verdict needs at least one type");
    std::unique_lock lock(mu_);
    auto it = table_.find(d.flag_id);
    if (it == table_.end()) throw NotFoundError("unknown flag '" + d.flag_id + "'");
    if (it->second.decision) {
      if (*it->second.decision == d) return it->second;
      throw ConflictError("flag '" + d.flag_id + "' was already decided differently");
    }
    append({{"op", "decision"}, {"decision", to_json(d)}});
    apply_decision(d);
    return it->second;
  }

  std::optional<FlagRecord> get(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = table_.find(id);
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

  // Descending score, then created_at, then flag_id.
  std::vector<FlagRecord> next_pending(std::size_t limit) const {
    std::shared_lock lock(mu_);
    std::vector<const FlagRecord*> v;
    for (const auto& [id, f] : table_)
      if (f.status == FlagStatus::pending) v.push_back(&f);
    std::sort(v.begin(), v.end(), [](const FlagRecord* a, const FlagRecord* b) {
      if (a->score != b->score) return a->score > b->score;
      if (a->created_at != b->created_at) return a->created_at < b->created_at;
      return a->flag_id < b->flag_id;
    });
    std::vector<FlagRecord> out;
    for (std::size_t i = 0; i < v.size() && i < limit; ++i) out.push_back(*v[i]);
    return out;
  }

  QueueStats stats() const {
    std::shared_lock lock(mu_);
    QueueStats s;
    for (const auto& [id, f] : table_) {
      switch (f.status) {
        case FlagStatus::pending: ++s.pending; break;
        case FlagStatus::accepted: ++s.accepted; break;
        case FlagStatus::rejected: ++s.rejected; break;
      }
    }
    return s;
  }

  std::map<std::string, FlagRecord> table() const {
    std::shared_lock lock(mu_);
    return table_;
  }

  // Decided flags as labeled examples, in creation order.
  std::vector<LabeledExample> decided_examples() const {
    std::shared_lock lock(mu_);
    std::vector<const FlagRecord*> v;
    for (const auto& [id, f] : table_)
      if (f.decision) v.push_back(&f);
    std::sort(v.begin(), v.end(), [](const FlagRecord* a, const FlagRecord* b) {
      return std::tie(a->created_at, a->flag_id) < std::tie(b->created_at, b->flag_id);
    });
    std::vector<LabeledExample> out;
    for (const FlagRecord* f : v) {
      LabeledExample e;
      e.text = f->text;
      e.doc_id = f->doc_id;
      e.page_no = f->page_no;
      e.identifier_types = identifier_mask(f->matches);
      const auto& d = *f->decision;
      if (d.verdict == Verdict::non_bias) {
        e.negative_kind = NegativeKind::EN;
        e.codes = {"non-bias"};
      } else {
        e.labels.any = true;
        e.codes = {d.verdict == Verdict::bias ? "bias" : "potential bias"};
        for (BiasType t : d.types) {
          e.labels.types[index_of(t)] = true;
          e.codes.push_back(type_code(t));
        }
      }
      out.push_back(std::move(e));
    }
    return out;
  }

  // Same format as the labeling module's output; header line first.
  void export_labels(std::ostream& out) const { write_labeled(out, decided_examples()); }

 private:
  void append(const nlohmann::json& rec) {
    std::string line = rec.dump();
    line.push_back('\n');
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      const auto n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("log write failed: ") + std::strerror(errno));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw IoError(std::string("log fsync failed: ") + std::strerror(errno));
  }

  void apply_flag(FlagRecord f) {
    seq_ = std::max(seq_, f.created_at);
    const auto id = f.flag_id;
    table_.emplace(id, std::move(f));
  }

  void apply_decision(const ReviewDecision& d) {
    auto it = table_.find(d.flag_id);
    if (it == table_.end()) throw IoError("log decides unknown flag '" + d.flag_id + "'");
    if (it->second.decision) {
      if (*it->second.decision == d) return;
      throw IoError("log holds conflicting decisions for '" + d.flag_id + "'");
    }
    it->second.decision = d;
    it->second.status = d.verdict == Verdict::non_bias ? FlagStatus::rejected : FlagStatus::accepted;
  }

  void replay() {
    std::error_code ec;
    if (!std::filesystem::exists(path_, ec)) return;
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IoError("cannot read log " + path_.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0, good = 0;
    while (pos < data.size()) {
      const auto nl = data.find('\n', pos);
      if (nl == std::string::npos) break;  // torn tail
      const std::string_view line(data.data() + pos, nl - pos);
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        if (nl + 1 == data.size()) break;  // garbled final line
        throw IoError("corrupt log line at byte " + std::to_string(pos));
      }
      try {
        const auto op = rec.at("op").get<std::string>();
        if (op == "flags") {
          for (const auto& f : rec.at("flags")) apply_flag(flag_from_json(f));
        } else if (op == "decision") {
          apply_decision(decision_from_json(rec.at("decision")));
        } else {
          throw IoError("unknown log op '" + op + "'");
        }
      } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad log record: ") + e.what());
      } catch (const ValidationError& e) {
        throw IoError(std::string("bad log record: ") + e.what());
      }
      pos = nl + 1;
      good = pos;
    }
    if (good < data.size()) std::filesystem::resize_file(path_, good);
  }

  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::shared_mutex mu_;
  std::map<std::string, FlagRecord> table_;
  std::uint64_t seq_ = 0;
};

}  // namespace biasflag
