#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "biasflag/common.hpp"
#include "biasflag/dataset.hpp"
#include "biasflag/evaluation.hpp"
#include "biasflag/model.hpp"

namespace biasflag {

// Cross-validated experiments: binary, MTL, OR-ensemble and baseline over the
// three training-set variations, with test folds held fixed per task.

enum class Method : std::uint8_t { binary, mtl, ensemble, baseline };

inline constexpr std::array<Method, 4> kMethods = {Method::binary, Method::mtl, Method::ensemble,
                                                   Method::baseline};

inline std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::binary: return "binary";
    case Method::mtl: return "mtl";
    case Method::ensemble: return "ensemble";
    case Method::baseline: return "baseline";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) noexcept {
  for (auto m : kMethods)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

struct ExperimentConfig {
  int folds = 5;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  FeaturizerConfig featurizer;
  int hidden_dim = 64;
  Hyperparams hp;
  // The baseline trains only a linear layer over frozen features and gets its
  // own rate; 0.1 was the strongest of {1e-3, 1e-2, 3e-2, 0.1, 0.3} on a
  // development corpus.
  Hyperparams baseline_hp = [] {
    Hyperparams h;
    h.learning_rate = 0.1;
    return h;
  }();
};

// Per-fold test-set outputs.
struct FoldPredictions {
  int fold = 0;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> scores;
  std::vector<int> predicted;
  // Ensemble only: each component's 0/1 prediction on the same examples.
  std::map<BiasType, std::vector<int>> components;
};

struct MethodRun {
  Task task = Task::general;
  Method method = Method::binary;
  VariationKind variation = VariationKind::ALL;
  std::vector<MetricsRecord> records;
  std::vector<RocResult> rocs;
  std::vector<FoldPredictions> predictions;
  std::vector<TrainingHistory> histories;

  FoldAggregate aggregate() const { return aggregate_folds(records); }
  CurveSet curves() const {
    return {task, std::string(to_string(method)), std::string(to_string(variation)), rocs};
  }
};

inline MetricsRecord score_fold(std::span<const int> labels, std::span<const double> scores,
                                std::span<const int> predicted) {
  MetricsRecord r = metrics(confusion(labels, predicted));
  r.auc = roc_auc(labels, scores).auc;
  return r;
}

namespace detail {

// Featurization is the hot path; every split of a run shares this cache.
class FeatureCache {
 public:
  explicit FeatureCache(FeaturizerConfig cfg) : cfg_(cfg) {}

  TrainingExample get(const LabeledExample& e) {
    const auto id = example_id(e);
    auto it = ids_.find(id);
    if (it == ids_.end()) it = ids_.emplace(id, featurize(e.text, cfg_)).first;
    return {it->second, e.labels};
  }
  std::vector<TrainingExample> get(const std::vector<LabeledExample>& v) {
    std::vector<TrainingExample> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(get(e));
    return out;
  }

 private:
  FeaturizerConfig cfg_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> ids_;
};

inline std::uint64_t run_seed(std::uint64_t seed, Task task, Method m, VariationKind v, int fold,
                              std::uint64_t extra = 0) {
  std::uint64_t key = (static_cast<std::uint64_t>(task) << 24) | (static_cast<std::uint64_t>(m) << 16) |
                      (static_cast<std::uint64_t>(v) << 8) | static_cast<std::uint64_t>(fold);
  return Rng::derive(seed, key, extra).next();
}

}  // namespace detail

struct TrainedFold {
  Model model;
  TrainingHistory history;
};

// Trains one model on `split` for the given heads.
inline TrainedFold train_split(const FoldSplit& split, const std::vector<Task>& tasks,
                               const ExperimentConfig& cfg, std::uint64_t seed,
                               detail::FeatureCache& cache) {
  ModelSpec spec;
  spec.featurizer = cfg.featurizer;
  spec.tasks = tasks;
  spec.hidden_dim = cfg.hidden_dim;
  TrainedFold out{make_model(spec), {}};
  initialize(out.model, seed);
  const auto train_set = cache.get(split.train);
  const auto val_set = cache.get(split.val);
  Hyperparams hp = cfg.hp;
  hp.seed = seed;
  out.history = train(out.model, train_set, val_set, class_weights_for(out.model, train_set), hp);
  return out;
}

inline TrainedFold train_baseline_split(const FoldSplit& split, Task task, const ExperimentConfig& cfg,
                                        std::uint64_t seed, detail::FeatureCache& cache) {
  const auto train_set = cache.get(split.train);
  const auto val_set = cache.get(split.val);
  TrainedFold out{make_baseline(cfg.featurizer, task, train_set, seed), {}};
  Hyperparams hp = cfg.baseline_hp;
  hp.seed = seed;
  out.history = train(out.model, train_set, val_set, class_weights_for(out.model, train_set), hp);
  return out;
}

inline double task_score(const Model& m, const TrainingExample& ex, Task t) {
  const auto head = m.head_of(t);
  if (!head) throw ConfigError("model has no head for task '" + std::string(to_string(t)) + "'");
  return forward_ids(m, ex.ids).probs[*head];
}

class Experiment {
 public:
  Experiment(const LabeledCorpus& corpus, ExperimentConfig cfg)
      : corpus_(corpus), cfg_(std::move(cfg)), cache_(cfg_.featurizer) {
    cfg_.featurizer.validate();
    cfg_.hp.validate();
  }

  const ExperimentConfig& config() const { return cfg_; }

  // Folds drawn from the task's variation-independent pool.
  const FoldAssignment& folds(Task t) {
    auto it = folds_.find(t);
    if (it == folds_.end())
      it = folds_.emplace(t, stratified_kfold(pool(t), cfg_.folds, cfg_.seed, cfg_.val_fraction)).first;
    return it->second;
  }

  const Dataset& pool(Task t) {
    auto it = pools_.find(t);
    if (it == pools_.end()) it = pools_.emplace(t, fold_pool(t, corpus_)).first;
    return it->second;
  }

  // binary / baseline: any task. mtl / ensemble: evaluated on the general task
  // (mtl also accepts a type task, scoring that head on the type's folds).
  MethodRun run(Task task, Method method, VariationKind v) {
    if (method == Method::ensemble && task != Task::general)
      throw ConfigError("the ensemble predicts the general label only");
    MethodRun out;
    out.task = task;
    out.method = method;
    out.variation = v;
    const Dataset source = method == Method::mtl ? mtl_dataset(corpus_, v) : task_dataset(task, corpus_, v);
    const Dataset& test_pool = pool(task);
    const FoldAssignment& fa = folds(task);
    for (int k = 0; k < fa.k; ++k) {
      FoldPredictions pred;
      pred.fold = k;
      std::vector<TrainingExample> test;
      {
        // Test-fold ids and examples come from the pool only.
        const FoldSplit s = split_fold(source, test_pool, fa, k);
        for (const auto& e : s.test) {
          pred.ids.push_back(example_id(e));
          pred.labels.push_back(e.labels.task(task) ? 1 : 0);
        }
        test = cache_.get(s.test);
        const std::uint64_t seed = detail::run_seed(cfg_.seed, task, method, v, k);
        switch (method) {
          case Method::binary:
          case Method::baseline:
          case Method::mtl: {
            std::vector<Task> tasks{task};
            if (method == Method::mtl) tasks.assign(kAllTasks.begin(), kAllTasks.end());
            TrainedFold tf = method == Method::baseline ? train_baseline_split(s, task, cfg_, seed, cache_)
                                                        : train_split(s, tasks, cfg_, seed, cache_);
            for (const auto& ex : test) pred.scores.push_back(task_score(tf.model, ex, task));
            out.histories.push_back(std::move(tf.history));
            break;
          }
          case Method::ensemble: {
            pred.scores.assign(test.size(), 0.0);
            for (BiasType t : kBiasTypes) {
              const Dataset comp = task_dataset(t, corpus_, v);
              const FoldSplit cs = split_fold(comp, test_pool, fa, k);
              const std::uint64_t cseed =
                  detail::run_seed(cfg_.seed, task, method, v, k, 1 + index_of(t));
              TrainedFold tf = train_split(cs, {task_of(t)}, cfg_, cseed, cache_);
              auto& cp = pred.components[t];
              for (std::size_t i = 0; i < test.size(); ++i) {
                const double p = task_score(tf.model, test[i], task_of(t));
                cp.push_back(decide_label(p, cfg_.hp.threshold) ? 1 : 0);
                // OR of thresholded components == threshold on the max.
                pred.scores[i] = std::max(pred.scores[i], p);
              }
              out.histories.push_back(std::move(tf.history));
            }
            break;
          }
        }
      }
      for (double p : pred.scores) pred.predicted.push_back(decide_label(p, cfg_.hp.threshold) ? 1 : 0);
      MetricsRecord rec = score_fold(pred.labels, pred.scores, pred.predicted);
      rec.task = task;
      rec.method = std::string(to_string(method));
      rec.variation = std::string(to_string(v));
      rec.fold = k;
      out.records.push_back(rec);
      out.rocs.push_back(roc_auc(pred.labels, pred.scores));
      out.predictions.push_back(std::move(pred));
    }
    return out;
  }

 private:
  const LabeledCorpus& corpus_;
  ExperimentConfig cfg_;
  detail::FeatureCache cache_;
  std::map<Task, FoldAssignment> folds_;
  std::map<Task, Dataset> pools_;
};

// Recall and precision of one ensemble component against the general label on
// the shared test folds (pooled over folds).
inline ConfusionCounts component_confusion(const MethodRun& ensemble, BiasType t) {
  ConfusionCounts c;
  for (const auto& p : ensemble.predictions) {
    const auto& cp = p.components.at(t);
    const auto f = confusion(p.labels, cp);
    c.tp += f.tp;
    c.fp += f.fp;
    c.fn += f.fn;
    c.tn += f.tn;
  }
  return c;
}

inline ConfusionCounts pooled_confusion(const MethodRun& run) {
  ConfusionCounts c;
  for (const auto& p : run.predictions) {
    const auto f = confusion(p.labels, p.predicted);
    c.tp += f.tp;
    c.fp += f.fp;
    c.fn += f.fn;
    c.tn += f.tn;
  }
  return c;
}

// Fits one deployable model on a whole dataset (less a validation slice).
inline TrainedFold fit_final(const Dataset& ds, const std::vector<Task>& tasks, const ExperimentConfig& cfg) {
  FoldSplit s;
  std::vector<LabeledExample> pos, neg;
  for (const auto& e : ds.examples) (e.labels.task(ds.task) ? pos : neg).push_back(e);
  std::uint64_t cls = 0;
  for (auto* group : {&pos, &neg}) {
    std::sort(group->begin(), group->end(),
              [](const auto& a, const auto& b) { return example_id(a) < example_id(b); });
    Rng rng = Rng::derive(cfg.seed ^ kValPurpose, 0xF1AA, cls++);
    rng.shuffle(*group);
    std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(group->size())));
    n_val = group->size() < 2 ? 0 : std::min(n_val, group->size() - 1);
    for (std::size_t i = 0; i < group->size(); ++i) (i < n_val ? s.val : s.train).push_back((*group)[i]);
  }
  detail::FeatureCache cache(cfg.featurizer);
  return train_split(s, tasks, cfg, Rng::derive(cfg.seed, 0xF1AA).next(), cache);
}

}  // namespace biasflag
