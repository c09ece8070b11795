#include <gtest/gtest.h>

#include "biasflag/pipeline.hpp"
#include "biasflag/synthetic.hpp"

using namespace biasflag;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_docs = 3;
  s.n_pages = 30;
  s.filler_per_page = 4;
  s.identifier_density = 0.7;
  s.positives = {12, 12, 12, 12, 12, 12};
  s.overlaps = {{BiasType::sex, BiasType::age, 4}};
  s.explicit_negatives = {6, 6, 6, 6, 6, 6};
  s.implicit_negatives = {4, 4, 4, 4, 4, 4};
  s.remaining_negatives = 10;
  return s;
}

const LabeledCorpus& corpus() {
  static const LabeledCorpus c = [] {
    const auto sc = generate_synthetic_corpus(small_spec(), 21);
    return build_labeled_corpus(sc.pages, sc.quotes, sc.lexicon);
  }();
  return c;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.folds = 3;
  cfg.seed = 5;
  cfg.featurizer.n_buckets = 1u << 12;
  cfg.featurizer.embed_dim = 16;
  cfg.hidden_dim = 16;
  cfg.hp.epochs = 3;
  cfg.hp.learning_rate = 0.01;
  cfg.baseline_hp.epochs = 3;
  return cfg;
}

}  // namespace

TEST(Method, Names) {
  for (auto m : kMethods) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_FALSE(parse_method("svm").has_value());
}

TEST(Experiment, RunsEveryMethodOnSharedFolds) {
  Experiment exp(corpus(), small_config());
  std::vector<std::vector<std::string>> fold_ids;
  for (auto method : kMethods) {
    for (auto v : {VariationKind::XN_ONLY, VariationKind::ALL}) {
      const auto run = exp.run(Task::general, method, v);
      ASSERT_EQ(run.records.size(), 3u);
      ASSERT_EQ(run.predictions.size(), 3u);
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& p = run.predictions[k];
        if (fold_ids.size() <= k) fold_ids.push_back(p.ids);
        EXPECT_EQ(p.ids, fold_ids[k]) << to_string(method) << " " << to_string(v);
        ASSERT_EQ(p.scores.size(), p.ids.size());
        for (double s : p.scores) {
          EXPECT_GE(s, 0.0);
          EXPECT_LE(s, 1.0);
        }
        EXPECT_TRUE(run.records[k].auc.has_value());
        if (method == Method::ensemble) {
          ASSERT_EQ(p.components.size(), kNumBiasTypes);
          for (std::size_t i = 0; i < p.ids.size(); ++i) {
            int any = 0;
            for (const auto& [t, c] : p.components) any |= c[i];
            EXPECT_EQ(p.predicted[i], any);
          }
        }
      }
      const auto agg = run.aggregate();
      EXPECT_EQ(agg.k, 3u);
      EXPECT_EQ(agg.method, std::string(to_string(method)));
    }
  }
}

TEST(Experiment, EnsembleRecallDominatesComponents) {
  Experiment exp(corpus(), small_config());
  const auto run = exp.run(Task::general, Method::ensemble, VariationKind::ALL_MINUS_RN);
  const auto pooled = metrics(pooled_confusion(run));
  for (BiasType t : kBiasTypes) {
    const auto comp = metrics(component_confusion(run, t));
    EXPECT_GE(*pooled.recall, *comp.recall) << to_string(t);
  }
}

TEST(Experiment, TypeTasksAndErrors) {
  Experiment exp(corpus(), small_config());
  const auto run = exp.run(Task::age, Method::binary, VariationKind::ALL_MINUS_RN);
  EXPECT_EQ(run.task, Task::age);
  std::size_t pos = 0;
  for (const auto& p : run.predictions) for (int y : p.labels) pos += y;
  EXPECT_EQ(pos, 16u);  // 12 planted + 4 overlapping with sex
  EXPECT_THROW(exp.run(Task::age, Method::ensemble, VariationKind::ALL), ConfigError);
  const auto mtl_age = exp.run(Task::age, Method::mtl, VariationKind::ALL);
  EXPECT_EQ(mtl_age.predictions[0].ids, run.predictions[0].ids);
}

TEST(Experiment, Deterministic) {
  Experiment a(corpus(), small_config());
  Experiment b(corpus(), small_config());
  const auto ra = a.run(Task::general, Method::binary, VariationKind::ALL);
  const auto rb = b.run(Task::general, Method::binary, VariationKind::ALL);
  for (std::size_t k = 0; k < ra.predictions.size(); ++k) EXPECT_EQ(ra.predictions[k].scores, rb.predictions[k].scores);
  EXPECT_EQ(ra.histories, rb.histories);
}

TEST(FitFinal, TrainsDeployableModel) {
  const auto ds = mtl_dataset(corpus(), VariationKind::ALL);
  std::vector<Task> tasks(kAllTasks.begin(), kAllTasks.end());
  const auto tf = fit_final(ds, tasks, small_config());
  EXPECT_TRUE(is_trained(tf.model));
  EXPECT_EQ(tf.model.n_tasks(), kNumTasks);
  EXPECT_EQ(tf.history.epochs.size(), 3u);
  EXPECT_TRUE(tf.history.epochs.back().val_loss.has_value());
}
