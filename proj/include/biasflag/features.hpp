#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasflag/common.hpp"
#include "biasflag/hash.hpp"

namespace biasflag {

struct FeaturizerConfig {
  std::uint64_t n_buckets = std::uint64_t{1} << 18;
  int word_ngrams = 1;     // 1 = unigrams, 2 = unigrams + bigrams
  int char_ngram_min = 3;  // 0 disables character n-grams
  int char_ngram_max = 5;
  int embed_dim = 64;
  std::uint64_t hash_seed = 0;

  void validate() const {
    if (n_buckets < (std::uint64_t{1} << 10) || (n_buckets & (n_buckets - 1)) != 0)
      throw ConfigError("n_buckets must be a power of two >= 1024");
    if (embed_dim < 8) throw ConfigError("embed_dim must be >= 8");
    if (word_ngrams < 1 || word_ngrams > 2) throw ConfigError("word_ngrams must be 1 or 2");
    if (char_ngram_min != 0) {
      if (char_ngram_min < 3 || char_ngram_max > 5 || char_ngram_min > char_ngram_max)
        throw ConfigError("char n-gram range must lie within [3, 5]");
    }
  }

  friend bool operator==(const FeaturizerConfig&, const FeaturizerConfig&) = default;
};

// Lowercase; split on anything that is not alphanumeric, keeping hyphens that
// sit between two alphanumerics. Non-ASCII bytes count as word characters.
inline std::vector<std::string> tokenize(std::string_view text) {
  auto word_char = [](unsigned char c) { return is_ascii_alnum(c) || c >= 0x80; };
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (word_char(c)) {
      cur.push_back(ascii_lower(static_cast<char>(c)));
    } else if (c == '-' && !cur.empty() && i + 1 < text.size() &&
               word_char(static_cast<unsigned char>(text[i + 1]))) {
      cur.push_back('-');
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Feature strings in generation order: for each token its unigram then its
// character n-grams of "<token>"; bigrams "a b" follow when enabled.
inline std::vector<std::string> feature_strings(const std::vector<std::string>& tokens,
                                                const FeaturizerConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& tok : tokens) {
    out.push_back(tok);
    if (cfg.char_ngram_min == 0) continue;
    const std::string padded = "<" + tok + ">";
    for (int n = cfg.char_ngram_min; n <= cfg.char_ngram_max; ++n) {
      const auto len = static_cast<std::size_t>(n);
      if (padded.size() < len) break;
      for (std::size_t i = 0; i + len <= padded.size(); ++i) out.push_back(padded.substr(i, len));
    }
  }
  if (cfg.word_ngrams >= 2) {
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.push_back(tokens[i] + " " + tokens[i + 1]);
  }
  return out;
}

inline std::uint64_t bucket_of(std::string_view feature, const FeaturizerConfig& cfg) {
  return stable_hash(feature, cfg.hash_seed) & (cfg.n_buckets - 1);
}

// Multiset of bucket ids (duplicates kept, generation order).
inline std::vector<std::uint32_t> hash_features(const std::vector<std::string>& tokens,
                                                const FeaturizerConfig& cfg) {
  std::vector<std::uint32_t> ids;
  for (const auto& f : feature_strings(tokens, cfg))
    ids.push_back(static_cast<std::uint32_t>(bucket_of(f, cfg)));
  return ids;
}

inline std::vector<std::uint32_t> featurize(std::string_view text, const FeaturizerConfig& cfg) {
  return hash_features(tokenize(text), cfg);
}

// Row-major B x d table of trainable embeddings.
struct EmbeddingTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;

  EmbeddingTable() = default;
  EmbeddingTable(std::size_t r, std::size_t c) : rows(r), cols(c), weights(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {weights.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {weights.data() + i * cols, cols}; }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

// Mean of the rows named by `ids`; zero vector for an empty bag.
inline std::vector<double> embed(std::span<const std::uint32_t> ids, const EmbeddingTable& table) {
  std::vector<double> out(table.cols, 0.0);
  if (ids.empty()) return out;
  for (auto id : ids) {
    if (id >= table.rows) throw ContractError("bucket id out of range");
    const auto r = table.row(id);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += r[k];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto& v : out) v *= inv;
  return out;
}

}  // namespace biasflag
