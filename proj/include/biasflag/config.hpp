#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <string>

#include "biasflag/common.hpp"
#include "biasflag/pipeline.hpp"

namespace biasflag {

// Flat "key = value" text. '#' starts a comment line; blank lines ignored.
using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw IngestError(n, "expected key = value");
    const auto key = std::string(trim(t.substr(0, eq)));
    if (key.empty()) throw IngestError(n, "empty key");
    out[key] = std::string(trim(t.substr(eq + 1)));
  }
  return out;
}

inline ConfigMap load_config(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read config " + p.string());
  return parse_config(in);
}

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError("bad value for '" + key + "': " + v);
  return out;
}

}  // namespace detail

// Applies recognised keys; unknown keys are an error so typos surface.
inline void apply_config(const ConfigMap& cfg, ExperimentConfig& ex) {
  for (const auto& [k, v] : cfg) {
    using detail::parse_number;
    if (k == "epochs") ex.hp.epochs = parse_number<int>(k, v);
    else if (k == "learning_rate") ex.hp.learning_rate = parse_number<double>(k, v);
    else if (k == "preset") {
      if (v == "finetune") ex.hp.learning_rate = Hyperparams::finetune_preset().learning_rate;
      else if (v != "default") throw ConfigError("unknown preset '" + v + "'");
    }
    else if (k == "batch_size") ex.hp.batch_size = parse_number<std::size_t>(k, v);
    else if (k == "threshold") ex.hp.threshold = parse_number<double>(k, v);
    else if (k == "seed") ex.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "folds") ex.folds = parse_number<int>(k, v);
    else if (k == "val_fraction") ex.val_fraction = parse_number<double>(k, v);
    else if (k == "hidden_dim") ex.hidden_dim = parse_number<int>(k, v);
    else if (k == "baseline_learning_rate") ex.baseline_hp.learning_rate = parse_number<double>(k, v);
    else if (k == "n_buckets") ex.featurizer.n_buckets = parse_number<std::uint64_t>(k, v);
    else if (k == "embed_dim") ex.featurizer.embed_dim = parse_number<int>(k, v);
    else if (k == "word_ngrams") ex.featurizer.word_ngrams = parse_number<int>(k, v);
    else if (k == "char_ngram_min") ex.featurizer.char_ngram_min = parse_number<int>(k, v);
    else if (k == "char_ngram_max") ex.featurizer.char_ngram_max = parse_number<int>(k, v);
    else if (k == "hash_seed") ex.featurizer.hash_seed = parse_number<std::uint64_t>(k, v);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  ex.baseline_hp.epochs = ex.hp.epochs;
  ex.baseline_hp.batch_size = ex.hp.batch_size;
  ex.baseline_hp.threshold = ex.hp.threshold;
  ex.featurizer.validate();
  ex.hp.validate();
}

// $BIAS_FLAGGER_HOME, else ./biasflag-data.
inline std::filesystem::path data_home() {
  if (const char* h = std::getenv("BIAS_FLAGGER_HOME"); h && *h) return h;
  return std::filesystem::current_path() / "biasflag-data";
}

}  // namespace biasflag
