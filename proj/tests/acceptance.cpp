// Acceptance suite: one PASS/FAIL line per criterion, with the runtime budget
// counted as part of the criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "biasflag/biasflag.hpp"
#include "biasflag/service_http.hpp"

using namespace biasflag;
namespace fs = std::filesystem;

namespace {

// Collects the first few failure reasons of a criterion.
struct Check {
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
  }
  bool ok() const { return failures.empty(); }
};

int g_failed = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) {
    std::ostringstream os;
    os << "runtime " << secs << "s over budget " << budget_s << "s";
    c.failures.push_back(os.str());
  }
  char head[160];
  std::snprintf(head, sizeof head, "%s %-24s %8.2fs / %5.0fs", c.ok() ? "PASS" : "FAIL", name.c_str(), secs,
                budget_s);
  std::cout << head;
  if (!c.detail.empty()) std::cout << "  " << c.detail;
  std::cout << '\n';
  for (const auto& f : c.failures) std::cout << "     - " << f << '\n';
  std::cout.flush();
  if (!c.ok()) ++g_failed;
}

std::string fmt(double v, int prec = 4) {
  char b[64];
  std::snprintf(b, sizeof b, "%.*f", prec, v);
  return b;
}

// ---------------------------------------------------------------------------
// 1. Loss
// ---------------------------------------------------------------------------

double oracle_wbce(int y, double p, double w0, double w1) {
  const double q = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
  return y == 1 ? -w1 * std::log(q) : -w0 * std::log(1.0 - q);
}

void loss_correctness(Check& c) {
  Rng rng(101);
  for (int i = 0; i < 500; ++i) {
    const int y = static_cast<int>(rng.below(2));
    // include the clamped ends
    const double p = i % 50 == 0 ? static_cast<double>(i % 100 == 0) : rng.uniform();
    const double w0 = rng.uniform(0.05, 20.0), w1 = rng.uniform(0.05, 20.0);
    const double got = wbce(y == 1, p, w0, w1), want = oracle_wbce(y, p, w0, w1);
    c.expect(std::abs(got - want) <= 1e-9, "wbce mismatch at triple " + std::to_string(i));
  }

  // Seven heads on one example, every logit computed here by hand.
  ModelSpec spec;
  spec.featurizer.n_buckets = 1u << 10;
  spec.featurizer.embed_dim = 8;
  spec.tasks.assign(kAllTasks.begin(), kAllTasks.end());
  spec.hidden_dim = 0;
  Model m = make_model(spec);
  m.embedding.row(5)[0] = 1.0;
  m.embedding.row(5)[1] = -2.0;
  m.embedding.row(9)[0] = 3.0;  // x = (2, -1, 0, ...)
  const double x0 = 2.0, x1 = -1.0;
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    m.head_w[t * 8 + 0] = 0.1 * static_cast<double>(t) - 0.2;
    m.head_w[t * 8 + 1] = 0.3;
    m.head_b[t] = 0.05 * static_cast<double>(t);
  }
  TrainingExample ex{{5, 9}, {}};
  ex.labels.any = true;
  ex.labels.types[index_of(BiasType::race)] = true;
  ex.labels.types[index_of(BiasType::ethnicity)] = true;
  ClassWeights w;
  for (std::size_t t = 0; t < kNumTasks; ++t) w[t] = {0.5 + 0.1 * static_cast<double>(t), 3.0 - 0.2 * static_cast<double>(t)};
  const int y[kNumTasks] = {1, 0, 0, 1, 1, 0, 0};  // general, gender, sex, race, ethnicity, age, geography
  double sum = 0.0;
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    const double z = m.head_b[t] + m.head_w[t * 8 + 0] * x0 + m.head_w[t * 8 + 1] * x1;
    sum += oracle_wbce(y[t], 1.0 / (1.0 + std::exp(-z)), w[t].w0, w[t].w1);
  }
  const double want = sum / 7.0;
  const double got = total_loss(m, std::vector<TrainingExample>{ex}, w);
  c.expect(std::abs(got - want) <= 1e-9, "7-task total " + std::to_string(got) + " vs " + std::to_string(want));
  c.detail = "500 triples, 7-task reduction |diff|=" + fmt(std::abs(got - want), 12);
}

// ---------------------------------------------------------------------------
// 2. Gradient check
// ---------------------------------------------------------------------------

void gradient_check_suite(Check& c) {
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    Rng rng(500 + static_cast<std::uint64_t>(i));
    ModelSpec spec;
    spec.featurizer.n_buckets = 1u << 10;
    spec.featurizer.embed_dim = 8;
    static const int kHidden[] = {0, 2, 3, 5};
    spec.hidden_dim = kHidden[i % 4];
    spec.tasks = {Task::general};
    for (Task t : kAllTasks)
      if (t != Task::general && rng.bernoulli(0.4)) spec.tasks.push_back(t);
    Model m = make_model(spec);
    initialize(m, 900 + static_cast<std::uint64_t>(i));
    for (auto& b : m.head_b) b = rng.uniform(-0.5, 0.5);
    for (auto& b : m.hidden_b) b = rng.uniform(0.05, 0.3);
    std::vector<TrainingExample> batch;
    const auto n = 2 + rng.below(4);
    for (std::uint64_t k = 0; k < n; ++k) {
      TrainingExample ex;
      for (std::uint64_t j = 0, len = 1 + rng.below(6); j < len; ++j)
        ex.ids.push_back(static_cast<std::uint32_t>(rng.below(40)));
      ex.labels.any = rng.bernoulli(0.5);
      if (ex.labels.any)
        for (BiasType t : kBiasTypes) ex.labels.types[index_of(t)] = rng.bernoulli(0.3);
      batch.push_back(ex);
    }
    ClassWeights w;
    for (auto& cw : w) cw = {rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0)};
    Hyperparams hp;
    for (auto& l : hp.task_weights) l = rng.uniform(0.5, 1.5);
    const double err = gradient_check(m, batch, w, hp);
    worst = std::max(worst, err);
    c.expect(err <= 1e-4, "model " + std::to_string(i) + " rel err " + std::to_string(err));
  }
  c.detail = "20 models, max rel err " + fmt(worst, 8);
}

// ---------------------------------------------------------------------------
// 3. Metric oracles
// ---------------------------------------------------------------------------

void metric_oracles(Check& c) {
  Rng rng(303);
  for (int i = 0; i < 1000; ++i) {
    const auto n = 1 + rng.below(200);
    std::vector<int> y(n), p(n);
    for (std::uint64_t k = 0; k < n; ++k) {
      y[k] = rng.bernoulli(0.35);
      p[k] = rng.bernoulli(0.4);
    }
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::uint64_t k = 0; k < n; ++k) {
      if (y[k] == 1 && p[k] == 1) ++tp;
      if (y[k] == 0 && p[k] == 1) ++fp;
      if (y[k] == 1 && p[k] == 0) ++fn;
      if (y[k] == 0 && p[k] == 0) ++tn;
    }
    const auto m = metrics(confusion(y, p));
    c.expect(*m.accuracy == static_cast<double>(tp + tn) / static_cast<double>(n), "accuracy");
    const bool p_def = tp + fp > 0, r_def = tp + fn > 0;
    c.expect(m.precision.has_value() == p_def, "precision definedness");
    c.expect(m.recall.has_value() == r_def, "recall definedness");
    if (p_def) c.expect(*m.precision == static_cast<double>(tp) / static_cast<double>(tp + fp), "precision");
    if (r_def) c.expect(*m.recall == static_cast<double>(tp) / static_cast<double>(tp + fn), "recall");
    if (p_def && r_def) {
      const double P = static_cast<double>(tp) / static_cast<double>(tp + fp);
      const double R = static_cast<double>(tp) / static_cast<double>(tp + fn);
      for (double beta : {1.0, 2.0}) {
        const double b2 = beta * beta;
        const Metric got = beta == 1.0 ? m.f1 : m.f2;
        if (b2 * P + R == 0.0) {
          c.expect(!got.has_value(), "F undefined when P = R = 0");
        } else {
          c.expect(got.has_value() && *got == (1 + b2) * P * R / (b2 * P + R), "F-beta");
        }
      }
    }
  }
  // AUC vs pairwise Mann-Whitney, in integers: 2 * wins + ties over 2 n+ n-.
  for (int i = 0; i < 200; ++i) {
    const auto n = 2 + rng.below(999);
    std::vector<int> y(n);
    std::vector<double> s(n);
    const auto levels = 2 + rng.below(i % 2 ? 20 : 100000);
    for (std::uint64_t k = 0; k < n; ++k) {
      y[k] = rng.bernoulli(0.3);
      s[k] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
    }
    y[0] = 1;
    y[1] = 0;
    std::uint64_t twice = 0, pos = 0, neg = 0;
    for (std::uint64_t a = 0; a < n; ++a) (y[a] ? pos : neg)++;
    for (std::uint64_t a = 0; a < n; ++a) {
      if (!y[a]) continue;
      for (std::uint64_t b = 0; b < n; ++b) {
        if (y[b]) continue;
        twice += s[a] > s[b] ? 2 : (s[a] == s[b] ? 1 : 0);
      }
    }
    const double mw = static_cast<double>(twice) / static_cast<double>(2 * pos * neg);
    const auto auc = roc_auc(y, s).auc;
    c.expect(auc.has_value() && *auc == mw, "AUC != Mann-Whitney on vector " + std::to_string(i));
  }
  c.detail = "1000 confusion fixtures, 200 AUC vectors";
}

// ---------------------------------------------------------------------------
// 4. Label mapping
// ---------------------------------------------------------------------------

void label_mapping(Check& c) {
  c.expect(general_label({"potential bias", "sex-disease", "female"}), "general example 1");
  c.expect(!general_label({"non-bias", "age-disease"}), "general example 2");
  c.expect(general_label({"review"}), "general example 3");
  c.expect(type_label({"bias", "race-disease"}, BiasType::race), "type example 1");
  c.expect(!type_label({"bias", "gender-disease"}, BiasType::race), "type example 2");
  c.expect(!type_label({"non-bias", "race-disease"}, BiasType::race), "type example 3");
  AnnotatedQuote q{"q", "D", 1, "t", {"bias", "ethnicity-disease", "race-disease"}, {}, "", {}};
  const auto v = label_record(q).labels;
  c.expect(v.any && v.type(BiasType::ethnicity) && v.type(BiasType::race) && v.type_count() == 2,
           "label_record example");

  std::vector<std::string> vocab = {"bias", "potential bias", "review", "non-bias", "Bias ", "REVIEW",
                                    "female", "sex misuse", "disability-disease"};
  for (BiasType t : kBiasTypes) {
    vocab.push_back(type_code(t));
    vocab.push_back(" " + to_lower_ascii(type_code(t)) + " ");
  }
  Rng rng(404);
  std::size_t sets = 0;
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::string> codes;
    for (std::uint64_t k = 0, n = rng.below(7); k < n; ++k) codes.push_back(rng.pick(vocab));
    const bool g = general_label(codes);
    for (BiasType t : kBiasTypes) c.expect(type_label(codes, t) <= g, "type_label > general_label");
    auto more = codes;
    more.push_back(rng.pick(vocab));
    c.expect(!g || general_label(more), "general_label not monotone");
    ++sets;
  }
  c.detail = std::to_string(sets) + " random code sets, 7 reference examples";
}

// ---------------------------------------------------------------------------
// 5. Pipeline properties
// ---------------------------------------------------------------------------

void pipeline_properties(Check& c) {
  std::size_t xn_total = 0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto sc = generate_synthetic_corpus(default_synthetic_spec(), seed);
    const auto xn = extract_xn(sc.pages, sc.quotes, sc.lexicon);
    xn_total += xn.size();
    std::map<std::pair<std::string, int>, const DocumentPage*> by_page;
    for (const auto& p : sc.pages) by_page[{p.doc_id, p.page_no}] = &p;
    std::map<std::pair<std::string, int>, std::vector<std::pair<std::size_t, std::size_t>>> spans;
    for (const auto& q : sc.quotes) {
      const auto& text = by_page.at({q.doc_id, q.page_no})->text;
      const auto at = text.find(q.text);
      c.expect(at != std::string::npos, "planted quote not on its page");
      if (at != std::string::npos) spans[{q.doc_id, q.page_no}].emplace_back(at, at + q.text.size());
    }
    for (const auto& x : xn) {
      c.expect(!find_identifiers(x.text, sc.lexicon).empty(), "XN without identifier: " + x.text);
      for (auto [b, e] : spans[{x.doc_id, x.page_no}])
        c.expect(x.end <= b || e <= x.start, "XN overlaps an annotated span: " + x.text);
    }

    // EN / IN / RN partition the label-0 quotes.
    std::size_t en = 0, in = 0, rn = 0, neg = 0;
    for (const auto& q : sc.quotes) {
      if (general_label(q.codes)) continue;
      ++neg;
      const bool has_nb = has_non_bias_code(q.codes), has_d = has_disease_code(q.codes);
      const auto k = categorize_negative(q);
      const int hits = (has_nb && has_d) + (!has_nb && has_d) + !has_d;
      c.expect(hits == 1, "negative categories overlap");
      if (has_nb && has_d) c.expect(k == NegativeKind::EN, "expected EN");
      if (!has_nb && has_d) c.expect(k == NegativeKind::IN, "expected IN");
      if (!has_d) c.expect(k == NegativeKind::RN, "expected RN");
      (k == NegativeKind::EN ? en : k == NegativeKind::IN ? in : rn)++;
    }
    c.expect(en + in + rn == neg && en > 0 && in > 0 && rn > 0, "partition does not cover negatives");

    const auto corpus = build_labeled_corpus(sc.pages, sc.quotes, sc.lexicon);
    for (Task t : kAllTasks) {
      const auto pool = fold_pool(t, corpus);
      const auto fa = stratified_kfold(pool, 5, seed);
      std::array<std::size_t, 5> pos{}, negs{};
      for (const auto& e : pool.examples) {
        const auto f = fa.fold(example_id(e));
        c.expect(f.has_value(), "pool example without fold");
        if (f) (e.labels.task(t) ? pos : negs)[static_cast<std::size_t>(*f)]++;
      }
      const auto [pmin, pmax] = std::minmax_element(pos.begin(), pos.end());
      const auto [nmin, nmax] = std::minmax_element(negs.begin(), negs.end());
      c.expect(*pmax - *pmin <= 1, "positive counts differ by more than one");
      c.expect(*nmax - *nmin <= 1, "negative counts differ by more than one");
      for (int k = 0; k < 5; ++k) {
        std::optional<std::set<std::string>> first;
        for (auto v : kVariations) {
          const auto s = split_fold(task_dataset(t, corpus, v), pool, fa, k);
          std::set<std::string> ids;
          for (const auto& e : s.test) ids.insert(example_id(e));
          if (!first) first = ids;
          c.expect(ids == *first, "test fold differs across variations");
        }
      }
    }
  }
  c.detail = "3 corpora, " + std::to_string(xn_total) + " XN sentences, 7 tasks";
}

// ---------------------------------------------------------------------------
// 6. Qualitative reproduction
// ---------------------------------------------------------------------------

void qualitative(Check& c) {
  const std::uint64_t seed = 1;
  const auto sc = generate_synthetic_corpus(default_synthetic_spec(), seed);
  const auto corpus = build_labeled_corpus(sc.pages, sc.quotes, sc.lexicon);
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.featurizer.n_buckets = 1u << 16;

  Experiment exp(corpus, cfg);
  const auto binary_an = exp.run(Task::general, Method::binary, VariationKind::ALL);
  const auto baseline_an = exp.run(Task::general, Method::baseline, VariationKind::ALL);
  const auto binary_xn = exp.run(Task::general, Method::binary, VariationKind::XN_ONLY);
  const auto ensemble_an = exp.run(Task::general, Method::ensemble, VariationKind::ALL);

  auto mean = [](const MethodRun& r, MetricName m) { return r.aggregate()[m].mean.value_or(-1.0); };
  const double auc = mean(binary_an, MetricName::auc), base = mean(baseline_an, MetricName::auc);
  c.expect(auc >= 0.90, "(a) binary AN AUC " + fmt(auc) + " < 0.90");
  c.expect(auc - base >= 0.10, "(a) binary AN AUC " + fmt(auc) + " beats baseline " + fmt(base) + " by < 0.10");

  const auto ens = metrics(pooled_confusion(ensemble_an));
  for (BiasType t : kBiasTypes) {
    const auto comp = metrics(component_confusion(ensemble_an, t));
    c.expect(*ens.recall >= *comp.recall, "(b) ensemble recall below " + std::string(to_string(t)));
  }
  const double ens_p = mean(ensemble_an, MetricName::precision), bin_p = mean(binary_an, MetricName::precision);
  c.expect(ens_p <= bin_p, "(b) ensemble precision " + fmt(ens_p) + " > binary " + fmt(bin_p));

  const double rec_xn = mean(binary_xn, MetricName::recall), rec_an = mean(binary_an, MetricName::recall);
  c.expect(rec_xn >= rec_an - 0.02, "(c) XN recall " + fmt(rec_xn) + " < AN recall " + fmt(rec_an) + " - 0.02");

  c.detail = "n=" + std::to_string(corpus.examples.size()) + " auc=" + fmt(auc) + " baseline=" + fmt(base) +
             " ens_rec=" + fmt(mean(ensemble_an, MetricName::recall)) + " ens_prec=" + fmt(ens_p) +
             " bin_prec=" + fmt(bin_p) + " xn_rec=" + fmt(rec_xn) + " an_rec=" + fmt(rec_an);
}

// ---------------------------------------------------------------------------
// 7. Determinism
// ---------------------------------------------------------------------------

std::string model_bytes(const Model& m) {
  std::ostringstream os;
  save_model(m, os);
  return os.str();
}

void determinism(Check& c) {
  const auto sc = generate_synthetic_corpus(default_synthetic_spec(), 7);
  const auto corpus = build_labeled_corpus(sc.pages, sc.quotes, sc.lexicon);
  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.featurizer.n_buckets = 1u << 16;
  const auto ds = mtl_dataset(corpus, VariationKind::ALL);
  const std::vector<Task> tasks(kAllTasks.begin(), kAllTasks.end());
  const auto a = fit_final(ds, tasks, cfg);
  const auto b = fit_final(ds, tasks, cfg);
  const auto ba = model_bytes(a.model), bb = model_bytes(b.model);
  c.expect(ba == bb, "model files differ");
  c.expect(a.history == b.history, "training histories differ");
  c.expect(to_json(a.history).dump() == to_json(b.history).dump(), "history JSON differs");

  const auto path = fs::temp_directory_path() / ("biasflag_accept_" + std::to_string(::getpid()) + ".bfm");
  save_model(a.model, path);
  const Model back = load_model(path);
  c.expect(back == a.model, "loaded model differs");
  c.expect(model_bytes(back) == ba, "re-saved bytes differ");
  fs::remove(path);
  c.detail = "7-head model, " + std::to_string(ba.size()) + " bytes, " + std::to_string(a.history.epochs.size()) +
             " epochs";
}

// ---------------------------------------------------------------------------
// 8. Service over HTTP
// ---------------------------------------------------------------------------

class Server {
 public:
  Server(const fs::path& log, const Model& model)
      : store_(log), svc_(store_, {model}, default_lexicon()) {
    port_ = svc_.bind_any("127.0.0.1");
    if (port_ <= 0) throw IoError("cannot bind");
    thread_ = std::thread([this] { svc_.listen_after_bind(); });
    svc_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  ~Server() {
    svc_.stop();
    thread_.join();
  }
  httplib::Client& client() { return *client_; }

  // (stats, queue, export) as raw bodies.
  std::string observe() {
    std::string out;
    for (const char* path : {"/stats", "/queue?limit=100000", "/export"}) {
      auto r = client_->Get(path);
      if (!r || r->status != 200) throw IoError(std::string("GET ") + path + " failed");
      out += r->body;
      out += '\x1e';
    }
    return out;
  }

 private:
  QueueStore store_;
  ReviewService svc_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

Model service_model() {
  SyntheticSpec s = default_synthetic_spec();
  s.n_pages = 40;
  for (auto& n : s.positives) n = 20;
  for (auto& n : s.explicit_negatives) n = 8;
  for (auto& n : s.implicit_negatives) n = 6;
  const auto sc = generate_synthetic_corpus(s, 31);
  const auto corpus = build_labeled_corpus(sc.pages, sc.quotes, sc.lexicon);
  ExperimentConfig cfg;
  cfg.featurizer.n_buckets = 1u << 14;
  cfg.featurizer.embed_dim = 16;
  cfg.hidden_dim = 16;
  cfg.hp.epochs = 4;
  cfg.hp.learning_rate = 0.01;
  return fit_final(mtl_dataset(corpus, VariationKind::ALL), {Task::general}, cfg).model;
}

void service(Check& c) {
  const Model model = service_model();
  const auto docs = generate_synthetic_corpus(default_synthetic_spec(), 77).pages;
  const auto dir = fs::temp_directory_path() / ("biasflag_accept_svc_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto log = dir / "queue.jsonl";

  std::vector<std::uintmax_t> sizes;
  std::vector<std::string> snapshots;
  std::map<std::string, nlohmann::json> decided;  // flag_id -> decision body
  std::size_t idempotent = 0;
  {
    Server srv(log, model);
    auto& cli = srv.client();
    sizes.push_back(0);
    snapshots.push_back(srv.observe());
    Rng rng(808);
    std::size_t next_page = 0;
    for (int op = 0; op < 60; ++op) {
      nlohmann::json q;
      if (auto r = cli.Get("/queue?limit=20"); r && r->status == 200) q = nlohmann::json::parse(r->body);
      const bool have_pending = q.contains("flags") && !q["flags"].empty();
      if (!have_pending || rng.bernoulli(0.3)) {
        nlohmann::json body = {{"pages", nlohmann::json::array()}};
        for (int k = 0; k < 2; ++k) body["pages"].push_back(to_json(docs[next_page++ % docs.size()]));
        auto r = cli.Post("/documents", body.dump(), "application/json");
        c.expect(r && r->status == 201, "POST /documents failed");
      } else if (!decided.empty() && rng.bernoulli(0.15)) {
        // repeat an earlier decision verbatim
        auto it = decided.begin();
        std::advance(it, static_cast<long>(rng.below(decided.size())));
        const auto before = fs::file_size(log);
        auto r = cli.Post("/decisions", it->second.dump(), "application/json");
        c.expect(r && r->status == 200, "repeated decision not accepted");
        c.expect(fs::file_size(log) == before, "repeated decision wrote to the log");
        auto conflict = it->second;
        conflict["reviewer_id"] = "someone-else";
        auto r2 = cli.Post("/decisions", conflict.dump(), "application/json");
        c.expect(r2 && r2->status == 409, "conflicting decision not rejected with 409");
        ++idempotent;
      } else {
        const auto& f = q["flags"][rng.below(q["flags"].size())];
        nlohmann::json d = {{"flag_id", f["flag_id"]}, {"reviewer_id", "r" + std::to_string(rng.below(3))}};
        const auto pick = rng.below(3);
        d["verdict"] = pick == 0 ? "non_bias" : (pick == 1 ? "bias" : "potential_bias");
        d["types"] = nlohmann::json::array();
        if (pick != 0) {
          for (BiasType t : kBiasTypes)
            if (rng.bernoulli(0.3)) d["types"].push_back(std::string(to_string(t)));
          if (d["types"].empty()) d["types"].push_back(std::string(to_string(kBiasTypes[rng.below(6)])));
        }
        auto r = cli.Post("/decisions", d.dump(), "application/json");
        c.expect(r && r->status == 200, "decision failed");
        decided[f["flag_id"]] = d;
      }
      sizes.push_back(fs::file_size(log));
      snapshots.push_back(srv.observe());
    }

    // Export maps each verdict onto the label vector exactly.
    auto r = cli.Get("/export");
    c.expect(r && r->status == 200, "GET /export failed");
    std::istringstream in(r ? r->body : "");
    const auto rows = read_labeled(in);
    c.expect(rows.size() == decided.size(), "export row count " + std::to_string(rows.size()) + " vs " +
                                                std::to_string(decided.size()) + " decisions");
  }
  // Row-by-row mapping, checked on a replay of the same log.
  {
    QueueStore store(log);
    std::ostringstream os;
    store.export_labels(os);
    std::istringstream in(os.str());
    const auto rows = read_labeled(in);
    const auto table = store.table();
    std::vector<const FlagRecord*> decided_flags;
    for (const auto& [id, f] : table)
      if (f.decision) decided_flags.push_back(&f);
    std::sort(decided_flags.begin(), decided_flags.end(), [](const FlagRecord* a, const FlagRecord* b) {
      return std::tie(a->created_at, a->flag_id) < std::tie(b->created_at, b->flag_id);
    });
    c.expect(decided_flags.size() == rows.size(), "decided flags vs export rows");
    for (std::size_t k = 0; k < std::min(rows.size(), decided_flags.size()); ++k) {
      const auto& d = decided.at(decided_flags[k]->flag_id);
      const bool positive = d["verdict"] != "non_bias";
      c.expect(rows[k].text == decided_flags[k]->text, "export text mismatch");
      c.expect(rows[k].labels.any == positive, "y_any mismatch");
      for (BiasType t : kBiasTypes) {
        bool named = false;
        for (const auto& x : d["types"]) named |= x.get<std::string>() == to_string(t);
        c.expect(rows[k].labels.type(t) == (positive && named), "y_t mismatch");
      }
      c.expect(rows[k].negative_kind.has_value() == !positive, "negative_kind mismatch");
    }
  }

  // 50 crash points: cut the log inside the append of op i+1 and restart.
  Rng rng(909);
  const auto full = [&] {
    std::ifstream in(log, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }();
  std::size_t torn = 0;
  for (int k = 0; k < 50; ++k) {
    const auto i = static_cast<std::size_t>(rng.below(sizes.size() - 1));
    const auto lo = sizes[i], hi = sizes[i + 1];
    const auto cut = lo + (hi > lo ? rng.below(hi - lo) : 0);
    torn += cut > lo;
    const auto copy = dir / ("crash_" + std::to_string(k) + ".jsonl");
    {
      std::ofstream out(copy, std::ios::binary | std::ios::trunc);
      out.write(full.data(), static_cast<std::streamsize>(cut));
    }
    Server srv(copy, model);
    c.expect(srv.observe() == snapshots[i], "crash point " + std::to_string(k) + " (op " + std::to_string(i) +
                                                ", byte " + std::to_string(cut) + ") diverges");
    c.expect(fs::file_size(copy) == lo, "torn tail not cut back at crash point " + std::to_string(k));
  }
  fs::remove_all(dir);
  c.detail = "60 ops, " + std::to_string(decided.size()) + " decisions, " + std::to_string(idempotent) +
             " repeats, 50 crash points (" + std::to_string(torn) + " mid-line)";
}

}  // namespace

int main() {
  std::cout << "biasflag acceptance\n";
  criterion("loss_correctness", 1, loss_correctness);
  criterion("gradient_check", 10, gradient_check_suite);
  criterion("metric_oracles", 10, metric_oracles);
  criterion("label_mapping", 1, label_mapping);
  criterion("pipeline_properties", 30, pipeline_properties);
  criterion("qualitative_reproduction", 600, qualitative);
  criterion("determinism", 120, determinism);
  criterion("service_http", 30, service);
  std::cout << (g_failed == 0 ? "all criteria passed" : std::to_string(g_failed) + " criteria failed") << '\n';
  return g_failed;
}
