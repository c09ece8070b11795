#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasflag/common.hpp"
#include "biasflag/labeling.hpp"
#include "json.hpp"

namespace biasflag {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Undefined metrics (zero denominators) are std::nullopt, never 0.
using Metric = std::optional<double>;

enum class MetricName : std::uint8_t { accuracy, precision, recall, f1, f2, auc };

inline constexpr std::array<MetricName, 6> kMetricNames = {
    MetricName::accuracy, MetricName::precision, MetricName::recall,
    MetricName::f1,       MetricName::f2,        MetricName::auc};

inline std::string_view to_string(MetricName m) noexcept {
  switch (m) {
    case MetricName::accuracy: return "accuracy";
    case MetricName::precision: return "precision";
    case MetricName::recall: return "recall";
    case MetricName::f1: return "f1";
    case MetricName::f2: return "f2";
    case MetricName::auc: return "auc";
  }
  return "?";
}

struct MetricsRecord {
  Metric accuracy, precision, recall, f1, f2, auc;
  Task task = Task::general;
  std::string method;
  std::string variation;
  int fold = -1;

  Metric get(MetricName m) const {
    switch (m) {
      case MetricName::accuracy: return accuracy;
      case MetricName::precision: return precision;
      case MetricName::recall: return recall;
      case MetricName::f1: return f1;
      case MetricName::f2: return f2;
      case MetricName::auc: return auc;
    }
    return std::nullopt;
  }
};

inline ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size())
    throw ValidationError("confusion: labels and predictions differ in length");
  if (labels.empty()) throw ValidationError("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] != 0, p = predictions[i] != 0;
    if (y && p) ++c.tp;
    else if (!y && p) ++c.fp;
    else if (y && !p) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

// F_beta = (1 + b^2) P R / (b^2 P + R); undefined when P or R is, or when the
// denominator vanishes.
inline Metric f_beta(Metric precision, Metric recall, double beta) {
  if (!precision || !recall) return std::nullopt;
  const double b2 = beta * beta;
  const double den = b2 * *precision + *recall;
  if (den == 0.0) return std::nullopt;
  return (1.0 + b2) * *precision * *recall / den;
}

inline MetricsRecord metrics(const ConfusionCounts& c) {
  MetricsRecord r;
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.f1 = f_beta(r.precision, r.recall, 1.0);
  r.f2 = f_beta(r.precision, r.recall, 2.0);
  return r;
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

struct RocPoint {
  double threshold;  // +inf for the (0, 0) origin
  double fpr;
  double tpr;
};

struct RocResult {
  std::vector<RocPoint> points;
  Metric auc;
};

// Sweep over distinct score thresholds (descending), tied scores grouped.
// The trapezoid area is accumulated in integers so it equals the Mann-Whitney
// statistic with half credit for ties bit for bit.
inline RocResult roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw ValidationError("roc_auc: length mismatch");
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::uint64_t n_pos = 0, n_neg = 0;
  for (int y : labels) (y ? n_pos : n_neg)++;

  RocResult r;
  const double inf = std::numeric_limits<double>::infinity();
  r.points.push_back({inf, 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0, area2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    const std::uint64_t tp0 = tp, fp0 = fp;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] ? tp : fp)++;
      ++i;
    }
    area2 += (fp - fp0) * (tp + tp0);
    const double fpr = n_neg ? static_cast<double>(fp) / static_cast<double>(n_neg) : 0.0;
    const double tpr = n_pos ? static_cast<double>(tp) / static_cast<double>(n_pos) : 0.0;
    r.points.push_back({s, fpr, tpr});
  }
  if (n_pos > 0 && n_neg > 0)
    r.auc = static_cast<double>(area2) / static_cast<double>(2 * n_pos * n_neg);
  return r;
}

// TPR interpolated on a fixed FPR grid; at vertical segments the upper value.
inline double tpr_at(const std::vector<RocPoint>& pts, double fpr) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].fpr <= fpr) best = std::max(best, pts[i].tpr);
    if (i > 0 && pts[i - 1].fpr < fpr && fpr < pts[i].fpr) {
      const double t = (fpr - pts[i - 1].fpr) / (pts[i].fpr - pts[i - 1].fpr);
      best = std::max(best, pts[i - 1].tpr + t * (pts[i].tpr - pts[i - 1].tpr));
    }
  }
  return best;
}

struct MeanRoc {
  std::vector<double> fpr;
  std::vector<double> tpr_mean;
  std::vector<double> tpr_std;
};

// Vertical averaging across folds on a 101-point FPR grid.
inline MeanRoc mean_roc(const std::vector<RocResult>& folds, std::size_t grid = 101) {
  MeanRoc m;
  for (std::size_t g = 0; g < grid; ++g) {
    const double f = static_cast<double>(g) / static_cast<double>(grid - 1);
    std::vector<double> v;
    for (const auto& r : folds) v.push_back(tpr_at(r.points, f));
    double mean = 0.0;
    for (double x : v) mean += x;
    mean = v.empty() ? 0.0 : mean / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    m.fpr.push_back(f);
    m.tpr_mean.push_back(mean);
    m.tpr_std.push_back(v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Fold aggregation
// ---------------------------------------------------------------------------

struct MetricStat {
  Metric mean;
  Metric std;  // sample (n - 1) standard deviation
  std::size_t n_defined = 0;
};

struct FoldAggregate {
  Task task = Task::general;
  std::string method;
  std::string variation;
  std::size_t k = 0;
  std::array<MetricStat, kMetricNames.size()> stats;

  const MetricStat& operator[](MetricName m) const { return stats[static_cast<std::size_t>(m)]; }
  // True when some fold had an undefined value for a metric.
  bool flagged() const {
    for (const auto& s : stats)
      if (s.n_defined < k) return true;
    return false;
  }
};

inline MetricStat mean_std(const std::vector<double>& v) {
  MetricStat s;
  s.n_defined = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  s.mean = mean;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

inline FoldAggregate aggregate_folds(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw ValidationError("aggregate_folds: no records");
  FoldAggregate agg;
  agg.task = records.front().task;
  agg.method = records.front().method;
  agg.variation = records.front().variation;
  agg.k = records.size();
  for (const auto& r : records) {
    if (r.task != agg.task || r.method != agg.method || r.variation != agg.variation)
      throw ValidationError("aggregate_folds: records mix tasks, methods or variations");
  }
  for (MetricName m : kMetricNames) {
    std::vector<double> defined;
    for (const auto& r : records)
      if (auto v = r.get(m)) defined.push_back(*v);
    agg.stats[static_cast<std::size_t>(m)] = mean_std(defined);
  }
  return agg;
}

// ---------------------------------------------------------------------------
// Bias-type co-occurrence
// ---------------------------------------------------------------------------

struct Cooccurrence {
  std::array<std::array<std::size_t, kNumBiasTypes>, kNumBiasTypes> counts{};
  std::array<std::size_t, kNumBiasTypes> totals{};
};

inline Cooccurrence cooccurrence(const std::vector<LabeledExample>& examples) {
  Cooccurrence c;
  for (const auto& e : examples) {
    for (BiasType s : kBiasTypes) {
      if (!e.labels.type(s)) continue;
      ++c.totals[index_of(s)];
      for (BiasType t : kBiasTypes)
        if (e.labels.type(t)) ++c.counts[index_of(s)][index_of(t)];
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct CurveSet {
  Task task = Task::general;
  std::string method;
  std::string variation;
  std::vector<RocResult> folds;
};

namespace detail {

inline std::string fmt_fixed(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

inline std::string fmt_metric(const Metric& m) { return m ? fmt_fixed(*m) : "NA"; }

inline std::string fmt_threshold(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", t);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

inline nlohmann::json metric_json(const Metric& m) {
  return m ? nlohmann::json(*m) : nlohmann::json(nullptr);
}

}  // namespace detail

inline std::string curve_stem(const CurveSet& c) {
  return "roc_" + std::string(to_string(c.task)) + "_" + c.method + "_" + c.variation;
}

// Writes metrics.csv (long form), table_<task>.csv (one row per method x
// variation), ROC point files and summary.json. Output is byte-stable.
inline void emit_report(const std::vector<FoldAggregate>& aggregates,
                        const std::vector<CurveSet>& curves, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create report directory " + dir.string());

  {
    auto out = detail::open_out(dir / "metrics.csv");
    out << "task,method,variation,metric,mean,std\n";
    for (const auto& a : aggregates)
      for (MetricName m : kMetricNames)
        out << to_string(a.task) << ',' << a.method << ',' << a.variation << ',' << to_string(m)
            << ',' << detail::fmt_metric(a[m].mean) << ',' << detail::fmt_metric(a[m].std) << '\n';
    if (!out) throw IoError("write failed: metrics.csv");
  }

  std::vector<Task> tasks;
  for (const auto& a : aggregates)
    if (std::find(tasks.begin(), tasks.end(), a.task) == tasks.end()) tasks.push_back(a.task);
  for (Task t : tasks) {
    auto out = detail::open_out(dir / ("table_" + std::string(to_string(t)) + ".csv"));
    out << "method,variation,precision,recall,f1,f2,auc,accuracy\n";
    for (const auto& a : aggregates) {
      if (a.task != t) continue;
      out << a.method << ',' << a.variation;
      for (MetricName m : {MetricName::precision, MetricName::recall, MetricName::f1,
                           MetricName::f2, MetricName::auc, MetricName::accuracy})
        out << ',' << detail::fmt_metric(a[m].mean);
      out << '\n';
    }
    if (!out) throw IoError("write failed: table");
  }

  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.folds.size(); ++k) {
      auto out = detail::open_out(dir / (curve_stem(c) + "_fold" + std::to_string(k) + ".csv"));
      out << "threshold,fpr,tpr\n";
      for (const auto& p : c.folds[k].points)
        out << detail::fmt_threshold(p.threshold) << ',' << detail::fmt_fixed(p.fpr) << ','
            << detail::fmt_fixed(p.tpr) << '\n';
    }
    if (c.folds.empty()) continue;
    const MeanRoc m = mean_roc(c.folds);
    auto out = detail::open_out(dir / (curve_stem(c) + "_mean.csv"));
    out << "fpr,tpr_mean,tpr_std\n";
    for (std::size_t g = 0; g < m.fpr.size(); ++g)
      out << detail::fmt_fixed(m.fpr[g]) << ',' << detail::fmt_fixed(m.tpr_mean[g]) << ','
          << detail::fmt_fixed(m.tpr_std[g]) << '\n';
  }

  nlohmann::json summary = nlohmann::json::array();
  for (const auto& a : aggregates) {
    nlohmann::json j = {{"task", std::string(to_string(a.task))},
                        {"method", a.method},
                        {"variation", a.variation},
                        {"folds", a.k},
                        {"flagged", a.flagged()}};
    for (MetricName m : kMetricNames) {
      j[std::string(to_string(m))] = {{"mean", detail::metric_json(a[m].mean)},
                                      {"std", detail::metric_json(a[m].std)},
                                      {"n_defined", a[m].n_defined}};
    }
    summary.push_back(std::move(j));
  }
  auto out = detail::open_out(dir / "summary.json");
  out << summary.dump(2) << '\n';
  if (!out) throw IoError("write failed: summary.json");
}

}  // namespace biasflag
