#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "biasflag/codes.hpp"
#include "biasflag/common.hpp"
#include "biasflag/corpus.hpp"
#include "biasflag/labeling.hpp"
#include "biasflag/lexicon.hpp"
#include "biasflag/random.hpp"
#include "json.hpp"

namespace biasflag {

enum class VariationKind : std::uint8_t { XN_ONLY, ALL, ALL_MINUS_RN };

inline constexpr std::array<VariationKind, 3> kVariations = {
    VariationKind::XN_ONLY, VariationKind::ALL, VariationKind::ALL_MINUS_RN};

inline std::string_view to_string(VariationKind v) noexcept {
  switch (v) {
    case VariationKind::XN_ONLY: return "xn";
    case VariationKind::ALL: return "an";
    case VariationKind::ALL_MINUS_RN: return "an-rn";
  }
  return "?";
}

inline std::optional<VariationKind> parse_variation(std::string_view s) noexcept {
  for (auto v : kVariations)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

// Every labeled example of a corpus: annotated positives, annotated negatives
// (EN / IN / RN) and extracted negatives (XN).
struct LabeledCorpus {
  std::vector<LabeledExample> examples;

  std::size_t count(NegativeKind k) const {
    return static_cast<std::size_t>(std::count_if(examples.begin(), examples.end(), [&](const auto& e) {
      return e.negative_kind == k;
    }));
  }
  std::size_t positives() const {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [](const auto& e) { return e.labels.any; }));
  }
};

inline LabeledExample from_negative(const NegativeExample& n) {
  LabeledExample e;
  e.text = n.text;
  e.negative_kind = n.kind;
  e.doc_id = n.doc_id;
  e.page_no = n.page_no;
  e.identifier_types = identifier_mask(n.matches);
  return e;
}

// Deduplicates on example identity, keeping the first occurrence.
inline void dedupe(std::vector<LabeledExample>& v) {
  std::unordered_set<std::string> seen;
  std::vector<LabeledExample> out;
  out.reserve(v.size());
  for (auto& e : v)
    if (seen.insert(example_id(e)).second) out.push_back(std::move(e));
  v = std::move(out);
}

inline LabeledCorpus build_labeled_corpus(const std::vector<DocumentPage>& pages,
                                          const std::vector<AnnotatedQuote>& quotes,
                                          const Lexicon& lex) {
  LabeledCorpus c;
  for (const auto& q : quotes) {
    auto e = label_record(q);
    e.identifier_types = identifier_mask(find_identifiers(q.text, lex));
    c.examples.push_back(std::move(e));
  }
  for (const auto& n : extract_xn(pages, quotes, lex)) c.examples.push_back(from_negative(n));
  dedupe(c.examples);
  return c;
}

struct NegativePools {
  std::vector<LabeledExample> en, in, rn, xn;
};

inline NegativePools negative_pools(const LabeledCorpus& c) {
  NegativePools p;
  for (const auto& e : c.examples) {
    if (!e.negative_kind) continue;
    switch (*e.negative_kind) {
      case NegativeKind::EN: p.en.push_back(e); break;
      case NegativeKind::IN: p.in.push_back(e); break;
      case NegativeKind::RN: p.rn.push_back(e); break;
      case NegativeKind::XN: p.xn.push_back(e); break;
    }
  }
  return p;
}

// XN_ONLY -> xn; ALL -> en + in + rn + xn; ALL_MINUS_RN -> en + in + xn.
inline std::vector<LabeledExample> build_variation(const NegativePools& p, VariationKind v) {
  std::vector<LabeledExample> out;
  auto append = [&](const std::vector<LabeledExample>& src) { out.insert(out.end(), src.begin(), src.end()); };
  if (v != VariationKind::XN_ONLY) {
    append(p.en);
    append(p.in);
    if (v == VariationKind::ALL) append(p.rn);
  }
  append(p.xn);
  return out;
}

struct Dataset {
  std::vector<LabeledExample> examples;
  Task task = Task::general;
  VariationKind variation = VariationKind::ALL;

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count_if(
        examples.begin(), examples.end(), [&](const auto& e) { return e.labels.task(task); }));
  }
  std::size_t negatives() const { return examples.size() - positives(); }
};

// Hard negatives are kept for type t when coded "<t>-disease"; when coded only
// with types outside the six, the lexicon decides.
inline bool hard_negative_relevant(const LabeledExample& e, BiasType t) {
  if (has_type_code(e.codes, t)) return true;
  return !has_any_known_type_code(e.codes) && e.mentions(t);
}

inline Dataset task_dataset(BiasType t, const LabeledCorpus& c, VariationKind v) {
  Dataset ds;
  ds.task = task_of(t);
  ds.variation = v;
  for (const auto& e : c.examples)
    if (e.labels.type(t)) ds.examples.push_back(e);
  if (ds.examples.empty())
    throw EmptyClassError("no positives for type '" + std::string(to_string(t)) + "'");
  NegativePools p = negative_pools(c);
  auto keep = [&](std::vector<LabeledExample>& pool, auto pred) {
    std::erase_if(pool, [&](const LabeledExample& e) { return !pred(e); });
  };
  keep(p.xn, [&](const LabeledExample& e) { return e.mentions(t); });
  keep(p.en, [&](const LabeledExample& e) { return hard_negative_relevant(e, t); });
  keep(p.in, [&](const LabeledExample& e) { return hard_negative_relevant(e, t); });
  auto neg = build_variation(p, v);
  if (neg.empty())
    throw EmptyClassError("no negatives for type '" + std::string(to_string(t)) + "'");
  ds.examples.insert(ds.examples.end(), neg.begin(), neg.end());
  dedupe(ds.examples);
  return ds;
}

// All positives with their full label vectors, plus the variation's negatives.
// Also the training set of the general binary classifier.
inline Dataset mtl_dataset(const LabeledCorpus& c, VariationKind v) {
  Dataset ds;
  ds.task = Task::general;
  ds.variation = v;
  for (const auto& e : c.examples)
    if (e.labels.any) ds.examples.push_back(e);
  auto neg = build_variation(negative_pools(c), v);
  ds.examples.insert(ds.examples.end(), neg.begin(), neg.end());
  dedupe(ds.examples);
  return ds;
}

inline Dataset task_dataset(Task t, const LabeledCorpus& c, VariationKind v) {
  if (auto b = bias_type_of(t)) return task_dataset(*b, c, v);
  return mtl_dataset(c, v);
}

// The examples folds are drawn from: positives, EN, IN and XN. RN never enters
// a test fold, so every variation of a task shares the same test sets.
inline Dataset fold_pool(Task t, const LabeledCorpus& c) {
  return task_dataset(t, c, VariationKind::ALL_MINUS_RN);
}

// ---------------------------------------------------------------------------
// Stratified K-fold
// ---------------------------------------------------------------------------

struct FoldAssignment {
  int k = 5;
  std::map<std::string, int> fold_of;  // example_id -> fold
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  std::optional<int> fold(const std::string& id) const {
    auto it = fold_of.find(id);
    if (it == fold_of.end()) return std::nullopt;
    return it->second;
  }
};

inline constexpr std::uint64_t kFoldPurpose = 0x464f4c44ULL;
inline constexpr std::uint64_t kValPurpose = 0x56414cULL;

// Class-wise seeded shuffle then round-robin, so per-fold class counts differ
// by at most one. RN examples are not assigned (they only ever train).
// Pass fold_pool(task, corpus) to keep test folds identical across variations.
inline FoldAssignment stratified_kfold(const Dataset& ds, int k, std::uint64_t seed,
                                       double val_fraction = 0.1) {
  if (k < 2) throw ValidationError("stratified_kfold: K must be >= 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ValidationError("stratified_kfold: val_fraction must lie in (0, 1)");
  std::vector<std::string> pos, neg;
  for (const auto& e : ds.examples) {
    if (e.negative_kind == NegativeKind::RN) continue;
    (e.labels.task(ds.task) ? pos : neg).push_back(example_id(e));
  }
  if (pos.size() < static_cast<std::size_t>(k) || neg.size() < static_cast<std::size_t>(k))
    throw EmptyClassError("stratified_kfold: a class has fewer than K members");
  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.val_fraction = val_fraction;
  std::size_t offset = 0;
  std::uint64_t cls = 0;
  for (auto* ids : {&pos, &neg}) {
    std::sort(ids->begin(), ids->end());
    ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
    Rng rng = Rng::derive(seed, kFoldPurpose, cls++);
    rng.shuffle(*ids);
    for (std::size_t i = 0; i < ids->size(); ++i)
      fa.fold_of[(*ids)[i]] = static_cast<int>((offset + i) % static_cast<std::size_t>(k));
    offset += ids->size();
  }
  return fa;
}

struct FoldSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> val;
  std::vector<LabeledExample> test;
};

// Test = pool examples in `fold`; training = the variation's examples outside
// it, less a stratified validation slice.
inline FoldSplit split_fold(const Dataset& train_source, const Dataset& pool,
                            const FoldAssignment& folds, int fold) {
  if (fold < 0 || fold >= folds.k) throw ValidationError("split_fold: fold out of range");
  FoldSplit s;
  std::unordered_set<std::string> test_ids;
  for (const auto& e : pool.examples) {
    const auto id = example_id(e);
    if (folds.fold(id) == fold) {
      test_ids.insert(id);
      s.test.push_back(e);
    }
  }
  std::vector<LabeledExample> pos, neg;
  for (const auto& e : train_source.examples) {
    if (test_ids.count(example_id(e))) continue;
    (e.labels.task(train_source.task) ? pos : neg).push_back(e);
  }
  std::uint64_t cls = 0;
  for (auto* group : {&pos, &neg}) {
    std::sort(group->begin(), group->end(),
              [](const auto& a, const auto& b) { return example_id(a) < example_id(b); });
    Rng rng = Rng::derive(folds.seed ^ kValPurpose, static_cast<std::uint64_t>(fold), cls++);
    rng.shuffle(*group);
    std::size_t n_val = static_cast<std::size_t>(std::llround(folds.val_fraction * static_cast<double>(group->size())));
    if (group->size() < 2) n_val = 0;
    n_val = std::min(n_val, group->size() - 1);
    for (std::size_t i = 0; i < group->size(); ++i)
      (i < n_val ? s.val : s.train).push_back((*group)[i]);
  }
  return s;
}

inline void write_folds(std::ostream& out, const FoldAssignment& fa) {
  for (const auto& [id, f] : fa.fold_of) out << nlohmann::json{{"example_id", id}, {"fold", f}}.dump() << '\n';
}

inline FoldAssignment read_folds(std::istream& in, int k) {
  FoldAssignment fa;
  fa.k = k;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    const auto id = detail::require_string(rec, "example_id", line);
    auto it = rec.find("fold");
    if (it == rec.end() || !it->is_number_integer()) throw IngestError(line, "missing fold");
    const int f = it->get<int>();
    if (f < 0 || f >= k) throw IngestError(line, "fold out of range");
    fa.fold_of[id] = f;
  });
  return fa;
}

}  // namespace biasflag
