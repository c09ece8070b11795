#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "biasflag/common.hpp"
#include "biasflag/evaluation.hpp"
#include "biasflag/features.hpp"
#include "biasflag/labeling.hpp"
#include "biasflag/random.hpp"
#include "json.hpp"

namespace biasflag {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct Hyperparams {
  int epochs = 10;
  // Backbone, embedding table and heads share one rate. See finetune_preset().
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Per-task loss weights (lambda_t). Equal weighting is the only setting
  // exercised; kept configurable.
  std::array<double, kNumTasks> task_weights{1, 1, 1, 1, 1, 1, 1};

  // Small rate for fine-tuning a backbone that starts from good weights.
  static Hyperparams finetune_preset() {
    Hyperparams h;
    h.learning_rate = 4e-5;
    return h;
  }

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  }
};

struct ClassWeight {
  double w0 = 1.0;
  double w1 = 1.0;
  friend bool operator==(const ClassWeight&, const ClassWeight&) = default;
};

// Indexed by static_cast<size_t>(Task).
using ClassWeights = std::array<ClassWeight, kNumTasks>;

inline constexpr double kProbEps = 1e-7;

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct ModelSpec {
  FeaturizerConfig featurizer;
  std::vector<Task> tasks{Task::general};
  int hidden_dim = 64;  // 0 = heads read the pooled embedding directly
  bool frozen_embedding = false;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Shared backbone (hashed embedding bag -> dense ReLU layer) with one logistic
// head per task. A binary model is the one-head case.
struct Model {
  ModelSpec spec;
  EmbeddingTable embedding;
  std::vector<double> hidden_w;  // h x d, row-major
  std::vector<double> hidden_b;  // h
  std::vector<double> head_w;    // T x in, in = h (or d without hidden layer)
  std::vector<double> head_b;    // T
  // Free-form training metadata persisted with the weights.
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t dim() const { return static_cast<std::size_t>(spec.featurizer.embed_dim); }
  std::size_t hidden() const { return static_cast<std::size_t>(spec.hidden_dim); }
  std::size_t head_in() const { return spec.hidden_dim > 0 ? hidden() : dim(); }
  std::size_t n_tasks() const { return spec.tasks.size(); }

  std::optional<std::size_t> head_of(Task t) const {
    for (std::size_t i = 0; i < spec.tasks.size(); ++i)
      if (spec.tasks[i] == t) return i;
    return std::nullopt;
  }

  std::size_t parameter_count() const {
    return embedding.weights.size() + hidden_w.size() + hidden_b.size() + head_w.size() +
           head_b.size();
  }

  friend bool operator==(const Model&, const Model&) = default;
};

inline Model make_model(const ModelSpec& spec) {
  spec.featurizer.validate();
  if (spec.tasks.empty()) throw ConfigError("model needs at least one task");
  if (spec.hidden_dim < 0) throw ConfigError("hidden_dim must be >= 0");
  Model m;
  m.spec = spec;
  m.embedding = EmbeddingTable(spec.featurizer.n_buckets, m.dim());
  m.hidden_w.assign(m.hidden() * m.dim(), 0.0);
  m.hidden_b.assign(m.hidden(), 0.0);
  m.head_w.assign(m.n_tasks() * m.head_in(), 0.0);
  m.head_b.assign(m.n_tasks(), 0.0);
  return m;
}

// Seeded initialization: embedding N(0, 0.1^2), hidden He-normal, heads
// N(0, 1/in); biases zero.
inline void initialize(Model& m, std::uint64_t seed) {
  Rng emb = Rng::derive(seed, 1);
  for (auto& w : m.embedding.weights) w = 0.1 * emb.normal();
  Rng hid = Rng::derive(seed, 2);
  const double he = std::sqrt(2.0 / static_cast<double>(m.dim()));
  for (auto& w : m.hidden_w) w = he * hid.normal();
  std::fill(m.hidden_b.begin(), m.hidden_b.end(), 0.0);
  Rng head = Rng::derive(seed, 3);
  const double xs = std::sqrt(1.0 / static_cast<double>(m.head_in()));
  for (auto& w : m.head_w) w = xs * head.normal();
  std::fill(m.head_b.begin(), m.head_b.end(), 0.0);
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline double bce(bool y, double p) {
  const double q = clamp_prob(p);
  return y ? -std::log(q) : -std::log(1.0 - q);
}

// w_y * BCE(y, p), p clamped to [eps, 1 - eps].
inline double wbce(bool y, double p, double w0, double w1) { return (y ? w1 : w0) * bce(y, p); }

// w_c = N / (2 N_c).
inline ClassWeight class_weights(std::size_t n_neg, std::size_t n_pos) {
  if (n_neg == 0 || n_pos == 0) throw EmptyClassError("class_weights: a class has no examples");
  const double n = static_cast<double>(n_neg + n_pos);
  return {n / (2.0 * static_cast<double>(n_neg)), n / (2.0 * static_cast<double>(n_pos))};
}

inline ClassWeight class_weights(const std::vector<LabeledExample>& data, Task task) {
  std::size_t pos = 0;
  for (const auto& e : data) pos += e.labels.task(task) ? 1 : 0;
  return class_weights(data.size() - pos, pos);
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

struct Activations {
  std::vector<double> x;       // pooled embedding (d)
  std::vector<double> z;       // hidden pre-activation (h)
  std::vector<double> a;       // head input (h, or d)
  std::vector<double> logits;  // T
  std::vector<double> probs;   // T
};

inline Activations forward_ids(const Model& m, std::span<const std::uint32_t> ids) {
  Activations act;
  act.x = embed(ids, m.embedding);
  const std::size_t d = m.dim(), h = m.hidden();
  if (h > 0) {
    act.z.assign(h, 0.0);
    act.a.assign(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
      double s = m.hidden_b[j];
      const double* row = m.hidden_w.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) s += row[k] * act.x[k];
      act.z[j] = s;
      act.a[j] = s > 0.0 ? s : 0.0;
    }
  } else {
    act.a = act.x;
  }
  const std::size_t in = m.head_in();
  act.logits.assign(m.n_tasks(), 0.0);
  act.probs.assign(m.n_tasks(), 0.0);
  for (std::size_t t = 0; t < m.n_tasks(); ++t) {
    double s = m.head_b[t];
    const double* row = m.head_w.data() + t * in;
    for (std::size_t k = 0; k < in; ++k) s += row[k] * act.a[k];
    if (!std::isfinite(s)) throw NumericError("non-finite logit; parameters have diverged");
    act.logits[t] = s;
    act.probs[t] = sigmoid(s);
  }
  return act;
}

// Probability per model task, in model task order.
struct TaskScores {
  std::vector<Task> tasks;
  std::vector<double> probs;

  std::optional<double> operator[](Task t) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i] == t) return probs[i];
    return std::nullopt;
  }
};

inline TaskScores forward(const Model& m, std::string_view text) {
  const auto ids = featurize(text, m.spec.featurizer);
  return {m.spec.tasks, forward_ids(m, ids).probs};
}

// 1{p > tau}; strict, so p == tau predicts 0.
inline bool decide_label(double p, double tau) { return p > tau; }

inline bool is_trained(const Model& m) { return m.metadata.value("trained", false); }

inline std::vector<std::pair<Task, bool>> predict(const Model& m, std::string_view text, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ContractError("threshold must lie in (0, 1)");
  const auto s = forward(m, text);
  std::vector<std::pair<Task, bool>> out;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) out.emplace_back(s.tasks[i], decide_label(s.probs[i], tau));
  return out;
}

// Logic-OR over one binary model per bias type.
using TypeModels = std::map<BiasType, const Model*>;

inline bool ensemble_predict(const TypeModels& models, std::string_view text, double tau) {
  for (BiasType t : kBiasTypes) {
    auto it = models.find(t);
    if (it == models.end() || it->second == nullptr)
      throw ConfigError("ensemble is missing a model for type '" + std::string(to_string(t)) + "'");
    if (!it->second->head_of(task_of(t)))
      throw ConfigError("ensemble model for '" + std::string(to_string(t)) + "' has no such head");
  }
  bool any = false;
  for (BiasType t : kBiasTypes) {
    const Model& m = *models.at(t);
    const auto s = forward(m, text);
    any = any || decide_label(*s[task_of(t)], tau);
  }
  return any;
}

// ---------------------------------------------------------------------------
// Total loss and gradients
// ---------------------------------------------------------------------------

struct TrainingExample {
  std::vector<std::uint32_t> ids;
  LabelVector labels;
};

inline TrainingExample make_training_example(const Model& m, const LabeledExample& e) {
  return {featurize(e.text, m.spec.featurizer), e.labels};
}

// (1 / (N * T)) * sum over examples and model tasks of lambda_t * WBCE.
inline double total_loss(const Model& m, std::span<const TrainingExample> batch,
                         const ClassWeights& weights, const Hyperparams& hp = {}) {
  if (batch.empty()) throw ContractError("total_loss: empty batch");
  double sum = 0.0;
  for (const auto& ex : batch) {
    const auto act = forward_ids(m, ex.ids);
    for (std::size_t t = 0; t < m.n_tasks(); ++t) {
      const Task task = m.spec.tasks[t];
      const auto& w = weights[static_cast<std::size_t>(task)];
      sum += hp.task_weights[static_cast<std::size_t>(task)] *
             wbce(ex.labels.task(task), act.probs[t], w.w0, w.w1);
    }
  }
  return sum / (static_cast<double>(batch.size()) * static_cast<double>(m.n_tasks()));
}

struct Gradients {
  std::map<std::uint32_t, std::vector<double>> embedding;  // touched rows only
  std::vector<double> hidden_w, hidden_b, head_w, head_b;

  explicit Gradients(const Model& m)
      : hidden_w(m.hidden_w.size(), 0.0),
        hidden_b(m.hidden_b.size(), 0.0),
        head_w(m.head_w.size(), 0.0),
        head_b(m.head_b.size(), 0.0) {}

  // Full-size embedding gradient, for checks against finite differences.
  std::vector<double> dense_embedding(const Model& m) const {
    std::vector<double> out(m.embedding.weights.size(), 0.0);
    for (const auto& [row, g] : embedding)
      std::copy(g.begin(), g.end(), out.begin() + static_cast<std::ptrdiff_t>(row * m.dim()));
    return out;
  }
};

// Accumulates d(total_loss)/d(theta) over `batch` into `g`; returns the loss.
inline double accumulate_gradients(const Model& m, std::span<const TrainingExample> batch,
                                   const ClassWeights& weights, const Hyperparams& hp,
                                   Gradients& g) {
  if (batch.empty()) throw ContractError("empty batch");
  const std::size_t d = m.dim(), h = m.hidden(), in = m.head_in(), T = m.n_tasks();
  const double scale = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(T));
  double loss = 0.0;
  std::vector<double> da(in), dz(h), dx(d);
  for (const auto& ex : batch) {
    const auto act = forward_ids(m, ex.ids);
    std::fill(da.begin(), da.end(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const Task task = m.spec.tasks[t];
      const bool y = ex.labels.task(task);
      const auto& w = weights[static_cast<std::size_t>(task)];
      const double lambda = hp.task_weights[static_cast<std::size_t>(task)];
      const double wy = y ? w.w1 : w.w0;
      const double p = act.probs[t];
      loss += lambda * wbce(y, p, w.w0, w.w1);
      // Clamped region has zero slope.
      const bool clamped = p < kProbEps || p > 1.0 - kProbEps;
      const double dlogit = clamped ? 0.0 : scale * lambda * wy * (p - (y ? 1.0 : 0.0));
      if (dlogit == 0.0) continue;
      double* gw = g.head_w.data() + t * in;
      const double* hw = m.head_w.data() + t * in;
      for (std::size_t k = 0; k < in; ++k) {
        gw[k] += dlogit * act.a[k];
        da[k] += dlogit * hw[k];
      }
      g.head_b[t] += dlogit;
    }
    if (h > 0) {
      for (std::size_t j = 0; j < h; ++j) dz[j] = act.z[j] > 0.0 ? da[j] : 0.0;
      std::fill(dx.begin(), dx.end(), 0.0);
      for (std::size_t j = 0; j < h; ++j) {
        if (dz[j] == 0.0) continue;
        double* gw = g.hidden_w.data() + j * d;
        const double* w = m.hidden_w.data() + j * d;
        for (std::size_t k = 0; k < d; ++k) {
          gw[k] += dz[j] * act.x[k];
          dx[k] += dz[j] * w[k];
        }
        g.hidden_b[j] += dz[j];
      }
    } else {
      std::copy(da.begin(), da.end(), dx.begin());
    }
    if (m.spec.frozen_embedding || ex.ids.empty()) continue;
    const double inv_n = 1.0 / static_cast<double>(ex.ids.size());
    for (auto id : ex.ids) {
      auto& row = g.embedding[id];
      if (row.empty()) row.assign(d, 0.0);
      for (std::size_t k = 0; k < d; ++k) row[k] += dx[k] * inv_n;
    }
  }
  return loss * scale;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries whose
// true gradient is ~0 from dividing by round-off.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Max relative error between `analytic` and central differences of `loss`
// taken over each entry of `params`.
template <typename LossFn>
double max_relative_error(std::span<double> params, std::span<const double> analytic, LossFn&& loss,
                          double step = 1e-4, double floor = 1e-6) {
  if (params.size() != analytic.size()) throw ContractError("gradient size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss();
    params[i] = saved - step;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, relative_error(analytic[i], numeric, floor));
  }
  return worst;
}

// Compares backprop against central differences (step 1e-4) over every
// parameter. Intended for small models (<= 1e4 parameters).
inline double gradient_check(Model& m, std::span<const TrainingExample> batch,
                             const ClassWeights& weights, const Hyperparams& hp = {}) {
  Gradients g(m);
  accumulate_gradients(m, batch, weights, hp, g);
  auto loss = [&] { return total_loss(m, batch, weights, hp); };
  double worst = 0.0;
  if (!m.spec.frozen_embedding) {
    const auto dense = g.dense_embedding(m);
    worst = std::max(worst, max_relative_error(m.embedding.weights, dense, loss));
  }
  worst = std::max(worst, max_relative_error(m.hidden_w, g.hidden_w, loss));
  worst = std::max(worst, max_relative_error(m.hidden_b, g.hidden_b, loss));
  worst = std::max(worst, max_relative_error(m.head_w, g.head_w, loss));
  worst = std::max(worst, max_relative_error(m.head_b, g.head_b, loss));
  return worst;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

// Adaptive moment estimation. Dense blocks update every step; embedding rows
// update only on steps where they receive gradient (lazy variant), with the
// global step used for bias correction.
class Adam {
 public:
  Adam(const Model& m, const Hyperparams& hp)
      : hp_(hp),
        m_hw_(m.hidden_w.size()), v_hw_(m.hidden_w.size()),
        m_hb_(m.hidden_b.size()), v_hb_(m.hidden_b.size()),
        m_ow_(m.head_w.size()), v_ow_(m.head_w.size()),
        m_ob_(m.head_b.size()), v_ob_(m.head_b.size()) {
    if (!m.spec.frozen_embedding) {
      m_emb_.assign(m.embedding.weights.size(), 0.0);
      v_emb_.assign(m.embedding.weights.size(), 0.0);
    }
  }

  void step(Model& m, const Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
    update(m.hidden_w, g.hidden_w, m_hw_, v_hw_, c1, c2);
    update(m.hidden_b, g.hidden_b, m_hb_, v_hb_, c1, c2);
    update(m.head_w, g.head_w, m_ow_, v_ow_, c1, c2);
    update(m.head_b, g.head_b, m_ob_, v_ob_, c1, c2);
    if (m.spec.frozen_embedding) return;
    const std::size_t d = m.dim();
    for (const auto& [row, grad] : g.embedding) {
      const std::size_t off = static_cast<std::size_t>(row) * d;
      update(std::span<double>(m.embedding.weights).subspan(off, d), grad,
             std::span<double>(m_emb_).subspan(off, d), std::span<double>(v_emb_).subspan(off, d),
             c1, c2);
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  void update(std::span<double> p, std::span<const double> g, std::span<double> mo,
              std::span<double> ve, double c1, double c2) const {
    const double lr = hp_.learning_rate;
    for (std::size_t i = 0; i < p.size(); ++i) {
      mo[i] = hp_.beta1 * mo[i] + (1.0 - hp_.beta1) * g[i];
      ve[i] = hp_.beta2 * ve[i] + (1.0 - hp_.beta2) * g[i] * g[i];
      p[i] -= lr * (mo[i] / c1) / (std::sqrt(ve[i] / c2) + hp_.adam_eps);
    }
  }

  Hyperparams hp_;
  std::uint64_t t_ = 0;
  std::vector<double> m_emb_, v_emb_;
  std::vector<double> m_hw_, v_hw_, m_hb_, v_hb_, m_ow_, v_ow_, m_ob_, v_ob_;
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::vector<Metric> val_auc;  // per model task

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingHistory {
  std::vector<Task> tasks;
  std::vector<EpochRecord> epochs;

  friend bool operator==(const TrainingHistory&, const TrainingHistory&) = default;
};

inline nlohmann::json to_json(const TrainingHistory& h) {
  nlohmann::json j;
  j["tasks"] = nlohmann::json::array();
  for (Task t : h.tasks) j["tasks"].push_back(std::string(to_string(t)));
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    nlohmann::json r = {{"epoch", e.epoch}, {"train_loss", e.train_loss}};
    r["val_loss"] = e.val_loss ? nlohmann::json(*e.val_loss) : nlohmann::json(nullptr);
    r["val_auc"] = nlohmann::json::array();
    for (const auto& a : e.val_auc) r["val_auc"].push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
    j["epochs"].push_back(std::move(r));
  }
  return j;
}

inline std::vector<Metric> task_aucs(const Model& m, std::span<const TrainingExample> data) {
  std::vector<Metric> out;
  std::vector<std::vector<double>> scores(m.n_tasks());
  for (const auto& ex : data) {
    const auto act = forward_ids(m, ex.ids);
    for (std::size_t t = 0; t < m.n_tasks(); ++t) scores[t].push_back(act.probs[t]);
  }
  for (std::size_t t = 0; t < m.n_tasks(); ++t) {
    std::vector<int> labels;
    for (const auto& ex : data) labels.push_back(ex.labels.task(m.spec.tasks[t]) ? 1 : 0);
    out.push_back(roc_auc(labels, scores[t]).auc);
  }
  return out;
}

// Class weights per model task from the class balance of `data`.
inline ClassWeights class_weights_for(const Model& m, std::span<const TrainingExample> data) {
  ClassWeights w{};
  for (Task t : m.spec.tasks) {
    std::size_t pos = 0;
    for (const auto& ex : data) pos += ex.labels.task(t) ? 1 : 0;
    w[static_cast<std::size_t>(t)] = class_weights(data.size() - pos, pos);
  }
  return w;
}

inline constexpr std::uint64_t kShufflePurpose = 0x5348554646ULL;

// Mini-batch Adam over `train`, shuffled per epoch from hp.seed. Records the
// full-pass training loss, validation loss and per-task validation AUC after
// every epoch. Single-threaded and bit-reproducible.
inline TrainingHistory train(Model& m, const std::vector<TrainingExample>& train_set,
                             const std::vector<TrainingExample>& val_set,
                             const ClassWeights& weights, const Hyperparams& hp) {
  hp.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  TrainingHistory hist;
  hist.tasks = m.spec.tasks;
  Adam opt(m, hp);
  std::vector<std::size_t> order(train_set.size());
  std::vector<TrainingExample> batch;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::derive(hp.seed, kShufflePurpose, static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += hp.batch_size) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + hp.batch_size); ++i)
        batch.push_back(train_set[order[i]]);
      Gradients g(m);
      const double loss = accumulate_gradients(m, batch, weights, hp, g);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b / hp.batch_size) + ", step " +
                           std::to_string(opt.steps()));
      }
      opt.step(m, g);
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = total_loss(m, train_set, weights, hp);
    if (!std::isfinite(rec.train_loss))
      throw NumericError("non-finite training loss after epoch " + std::to_string(epoch + 1));
    if (!val_set.empty()) {
      rec.val_loss = total_loss(m, val_set, weights, hp);
      rec.val_auc = task_aucs(m, val_set);
    }
    hist.epochs.push_back(std::move(rec));
  }
  m.metadata["trained"] = true;
  m.metadata["epochs"] = hp.epochs;
  return hist;
}

// Frozen random embedding table + one logistic layer. Starts as a prior-rate
// predictor (zero weights, bias at the training-set log-odds).
inline Model make_baseline(const FeaturizerConfig& fc, Task task,
                           std::span<const TrainingExample> train_set, std::uint64_t seed) {
  ModelSpec spec;
  spec.featurizer = fc;
  spec.tasks = {task};
  spec.hidden_dim = 0;
  spec.frozen_embedding = true;
  Model m = make_model(spec);
  initialize(m, seed);
  std::fill(m.head_w.begin(), m.head_w.end(), 0.0);
  std::size_t pos = 0;
  for (const auto& ex : train_set) pos += ex.labels.task(task) ? 1 : 0;
  if (pos == 0 || pos == train_set.size()) throw EmptyClassError("baseline: single-class training set");
  const double prior = static_cast<double>(pos) / static_cast<double>(train_set.size());
  m.head_b[0] = std::log(prior / (1.0 - prior));
  return m;
}

// ---------------------------------------------------------------------------
// Serialization ("BFM1" container)
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[4] = {'B', 'F', 'M', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}
inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated model file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated model file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline void put_block(std::ostream& out, std::span<const double> data, std::uint64_t rows,
                      std::uint64_t cols) {
  put_u64(out, rows);
  put_u64(out, cols);
  std::vector<char> buf(data.size() * 8);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(data[i]);
    for (int k = 0; k < 8; ++k) buf[i * 8 + static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void get_block(std::istream& in, std::vector<double>& data, std::uint64_t rows,
                      std::uint64_t cols) {
  if (get_u64(in) != rows || get_u64(in) != cols) throw IoError("model block shape mismatch");
  std::vector<unsigned char> buf(rows * cols * 8);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw IoError("truncated model block");
  data.resize(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 7; k >= 0; --k) bits = (bits << 8) | buf[i * 8 + static_cast<std::size_t>(k)];
    data[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace detail

inline nlohmann::json model_header(const Model& m) {
  const auto& f = m.spec.featurizer;
  nlohmann::json j;
  j["featurizer"] = {{"n_buckets", f.n_buckets},         {"word_ngrams", f.word_ngrams},
                     {"char_ngram_min", f.char_ngram_min}, {"char_ngram_max", f.char_ngram_max},
                     {"embed_dim", f.embed_dim},         {"hash_seed", f.hash_seed}};
  j["tasks"] = nlohmann::json::array();
  for (Task t : m.spec.tasks) j["tasks"].push_back(std::string(to_string(t)));
  j["hidden_dim"] = m.spec.hidden_dim;
  j["frozen_embedding"] = m.spec.frozen_embedding;
  j["metadata"] = m.metadata;
  return j;
}

// Layout: magic "BFM1", u32 version, u64 header length, header JSON, then the
// weight blocks (embedding, hidden_w, hidden_b, head_w, head_b), each as u64
// rows, u64 cols and row-major little-endian IEEE-754 doubles.
inline void save_model(const Model& m, std::ostream& out) {
  out.write(kModelMagic, 4);
  detail::put_u32(out, kModelVersion);
  const std::string header = model_header(m).dump();
  detail::put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put_block(out, m.embedding.weights, m.embedding.rows, m.embedding.cols);
  detail::put_block(out, m.hidden_w, m.hidden(), m.dim());
  detail::put_block(out, m.hidden_b, 1, m.hidden());
  detail::put_block(out, m.head_w, m.n_tasks(), m.head_in());
  detail::put_block(out, m.head_b, 1, m.n_tasks());
  if (!out) throw IoError("failed to write model");
}

inline Model load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
    throw IoError("not a model file (bad magic)");
  if (detail::get_u32(in) != kModelVersion) throw IoError("unsupported model version");
  const auto len = detail::get_u64(in);
  if (len > (1u << 26)) throw IoError("model header too large");
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len))) throw IoError("truncated header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
    ModelSpec spec;
    const auto& f = j.at("featurizer");
    spec.featurizer.n_buckets = f.at("n_buckets").get<std::uint64_t>();
    spec.featurizer.word_ngrams = f.at("word_ngrams").get<int>();
    spec.featurizer.char_ngram_min = f.at("char_ngram_min").get<int>();
    spec.featurizer.char_ngram_max = f.at("char_ngram_max").get<int>();
    spec.featurizer.embed_dim = f.at("embed_dim").get<int>();
    spec.featurizer.hash_seed = f.at("hash_seed").get<std::uint64_t>();
    spec.tasks.clear();
    for (const auto& t : j.at("tasks")) {
      auto task = parse_task(t.get<std::string>());
      if (!task) throw IoError("unknown task in model header");
      spec.tasks.push_back(*task);
    }
    spec.hidden_dim = j.at("hidden_dim").get<int>();
    spec.frozen_embedding = j.at("frozen_embedding").get<bool>();
    Model m = make_model(spec);
    m.metadata = j.at("metadata");
    detail::get_block(in, m.embedding.weights, m.embedding.rows, m.embedding.cols);
    detail::get_block(in, m.hidden_w, m.hidden(), m.dim());
    detail::get_block(in, m.hidden_b, 1, m.hidden());
    detail::get_block(in, m.head_w, m.n_tasks(), m.head_in());
    detail::get_block(in, m.head_b, 1, m.n_tasks());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad model header: ") + e.what());
  }
}

inline void save_model(const Model& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  save_model(m, out);
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return load_model(in);
}

}  // namespace biasflag
