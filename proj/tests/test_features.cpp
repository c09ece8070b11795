#include <gtest/gtest.h>

#include "biasflag/features.hpp"
#include "biasflag/random.hpp"

using namespace biasflag;

using Strings = std::vector<std::string>;

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("BMI > 30"), (Strings{"bmi", "30"}));
  EXPECT_EQ(tokenize("African-American women"), (Strings{"african-american", "women"}));
  EXPECT_EQ(tokenize("  -lead and trail- "), (Strings{"lead", "and", "trail"}));
  EXPECT_EQ(tokenize("a--b"), (Strings{"a", "b"}));
  EXPECT_EQ(tokenize("caf\xc3\xa9!"), (Strings{"caf\xc3\xa9"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("?!  ...").empty());
}

TEST(FeatureStrings, CharGramsOfShortToken) {
  FeaturizerConfig cfg;
  EXPECT_EQ(feature_strings({"age"}, cfg),
            (Strings{"age", "<ag", "age", "ge>", "<age", "age>", "<age>"}));
  // "<a>" has three chars: one trigram, nothing longer
  EXPECT_EQ(feature_strings({"a"}, cfg), (Strings{"a", "<a>"}));
  cfg.char_ngram_min = 0;
  cfg.word_ngrams = 2;
  EXPECT_EQ(feature_strings({"older", "women", "die"}, cfg),
            (Strings{"older", "women", "die", "older women", "women die"}));
}

TEST(Buckets, FrozenVectors) {
  // computed by an independent implementation of the hash, seed 0, 2^18 buckets
  FeaturizerConfig cfg;
  const std::vector<std::uint32_t> expected = {139354, 247179, 139354, 211691, 223909, 186872, 39435};
  EXPECT_EQ(featurize("Age", cfg), expected);
  EXPECT_EQ(featurize("  AGE. ", cfg), expected);
}

TEST(Buckets, InRangeAndSeedDependent) {
  FeaturizerConfig a;
  a.n_buckets = 1u << 10;
  FeaturizerConfig b = a;
  b.hash_seed = 1;
  const auto fa = featurize("Hispanic patients over 65 with diabetes", a);
  const auto fb = featurize("Hispanic patients over 65 with diabetes", b);
  for (auto id : fa) EXPECT_LT(id, 1024u);
  EXPECT_EQ(fa.size(), fb.size());
  EXPECT_NE(fa, fb);
}

TEST(Config, Validation) {
  FeaturizerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_buckets = 1000;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.char_ngram_max = 6;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.embed_dim = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.word_ngrams = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Embed, MeanPooling) {
  EmbeddingTable t(4, 2);
  t.row(1)[0] = 3.0;
  t.row(1)[1] = -3.0;
  t.row(2)[0] = 6.0;
  t.row(2)[1] = 0.0;
  const std::vector<std::uint32_t> ids = {1, 1, 2};
  const auto v = embed(ids, t);
  EXPECT_DOUBLE_EQ(v[0], (3.0 + 3.0 + 6.0) / 3.0);
  EXPECT_DOUBLE_EQ(v[1], -2.0);
  EXPECT_EQ(embed(std::vector<std::uint32_t>{}, t), (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(embed(std::vector<std::uint32_t>{4}, t), ContractError);
}

TEST(Embed, PermutationInvariant) {
  EmbeddingTable t(64, 8);
  Rng rng(5);
  for (auto& w : t.weights) w = rng.normal();
  for (int it = 0; it < 200; ++it) {
    std::vector<std::uint32_t> ids(1 + rng.below(20));
    for (auto& id : ids) id = static_cast<std::uint32_t>(rng.below(64));
    const auto base = embed(ids, t);
    rng.shuffle(ids);
    const auto shuffled = embed(ids, t);
    for (std::size_t k = 0; k < base.size(); ++k) ASSERT_NEAR(base[k], shuffled[k], 1e-12);
  }
}

TEST(Featurize, WordOrderDoesNotMatterForUnigrams) {
  FeaturizerConfig cfg;
  auto a = featurize("women over 65 are frail", cfg);
  auto b = featurize("frail are 65 over women", cfg);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}
