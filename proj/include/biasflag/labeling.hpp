#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "biasflag/codes.hpp"
#include "biasflag/common.hpp"
#include "biasflag/corpus.hpp"
#include "biasflag/hash.hpp"
#include "json.hpp"

namespace biasflag {

struct LabelVector {
  bool any = false;
  std::array<bool, kNumBiasTypes> types{};

  bool type(BiasType t) const noexcept { return types[index_of(t)]; }
  bool task(Task t) const noexcept {
    if (auto b = bias_type_of(t)) return type(*b);
    return any;
  }
  std::size_t type_count() const noexcept {
    return static_cast<std::size_t>(std::count(types.begin(), types.end(), true));
  }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

struct LabeledExample {
  std::string text;
  LabelVector labels;
  std::optional<NegativeKind> negative_kind;  // present iff labels.any == false
  std::string doc_id;
  int page_no = 0;
  // Provenance used by per-task negative filtering. Not part of the
  // interchange format's required fields.
  std::vector<std::string> codes;
  std::uint8_t identifier_types = 0;  // bit i set = mentions kBiasTypes[i]

  bool mentions(BiasType t) const noexcept { return identifier_types & (1u << index_of(t)); }

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

// Stable identity over (normalized text, doc_id, page_no).
inline std::string example_id(std::string_view text, std::string_view doc_id, int page_no) {
  std::string key = normalize_for_match(text);
  key.push_back('\x1f');
  key += doc_id;
  key.push_back('\x1f');
  key += std::to_string(page_no);
  return to_hex(stable_hash(key, 0x6578616d706c65ULL));
}

inline std::string example_id(const LabeledExample& e) {
  return example_id(e.text, e.doc_id, e.page_no);
}

// y_any: 1 iff any of "bias", "potential bias", "review" is present.
inline bool general_label(const std::vector<std::string>& codes) { return has_positive_code(codes); }

// y_t: 1 iff y_any = 1 and the "<t>-disease" code is present.
inline bool type_label(const std::vector<std::string>& codes, BiasType t) {
  return general_label(codes) && has_type_code(codes, t);
}

inline LabelVector label_codes(const std::vector<std::string>& codes) {
  LabelVector v;
  v.any = general_label(codes);
  for (BiasType t : kBiasTypes) v.types[index_of(t)] = v.any && has_type_code(codes, t);
  return v;
}

inline LabeledExample label_record(const AnnotatedQuote& q) {
  LabeledExample e;
  e.text = q.text;
  e.labels = label_codes(q.codes);
  if (!e.labels.any) e.negative_kind = negative_kind_for_codes(q.codes);
  e.doc_id = q.doc_id;
  e.page_no = q.page_no;
  e.codes = q.codes;
  return e;
}

// ---------------------------------------------------------------------------
// Labeled dataset file: JSON lines. The first line is a header record; readers
// skip header records wherever they appear so files concatenate.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kLabeledFormat = "biasflag-labeled";

inline nlohmann::json labeled_header() { return {{"format", kLabeledFormat}, {"version", 1}}; }

inline nlohmann::json to_json(const LabeledExample& e) {
  nlohmann::json j;
  j["text"] = e.text;
  j["y_any"] = e.labels.any ? 1 : 0;
  for (BiasType t : kBiasTypes) j["y_" + std::string(to_string(t))] = e.labels.type(t) ? 1 : 0;
  j["negative_kind"] = e.negative_kind ? nlohmann::json(std::string(to_string(*e.negative_kind)))
                                       : nlohmann::json(nullptr);
  j["doc_id"] = e.doc_id;
  j["page_no"] = e.page_no;
  if (!e.codes.empty()) j["codes"] = e.codes;
  if (e.identifier_types != 0) {
    nlohmann::json types = nlohmann::json::array();
    for (BiasType t : kBiasTypes)
      if (e.mentions(t)) types.push_back(std::string(to_string(t)));
    j["identifier_types"] = types;
  }
  return j;
}

inline void write_labeled(std::ostream& out, const std::vector<LabeledExample>& examples) {
  out << labeled_header().dump() << '\n';
  for (const auto& e : examples) out << to_json(e).dump() << '\n';
}

inline std::vector<LabeledExample> read_labeled(std::istream& in) {
  std::vector<LabeledExample> out;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    if (rec.contains("format")) return;
    LabeledExample e;
    e.text = detail::require_string(rec, "text", line);
    auto bit = [&](const std::string& key) {
      auto it = rec.find(key);
      if (it == rec.end() || !it->is_number_integer())
        throw IngestError(line, "missing integer field '" + key + "'");
      const auto v = it->get<long long>();
      if (v != 0 && v != 1) throw IngestError(line, "field '" + key + "' must be 0 or 1");
      return v == 1;
    };
    e.labels.any = bit("y_any");
    for (BiasType t : kBiasTypes) e.labels.types[index_of(t)] = bit("y_" + std::string(to_string(t)));
    if (!e.labels.any && e.labels.type_count() > 0)
      throw IngestError(line, "type label set without y_any");
    if (auto k = detail::optional_string(rec, "negative_kind", line)) {
      auto kind = parse_negative_kind(*k);
      if (!kind) throw IngestError(line, "unknown negative_kind '" + *k + "'");
      e.negative_kind = *kind;
    }
    if (e.negative_kind.has_value() == e.labels.any)
      throw IngestError(line, "negative_kind must be present iff y_any = 0");
    e.doc_id = detail::require_string(rec, "doc_id", line);
    e.page_no = detail::require_page(rec, line);
    if (auto it = rec.find("codes"); it != rec.end() && it->is_array())
      for (const auto& c : *it) e.codes.push_back(c.get<std::string>());
    if (auto it = rec.find("identifier_types"); it != rec.end() && it->is_array()) {
      for (const auto& c : *it) {
        auto t = parse_bias_type(c.get<std::string>());
        if (!t) throw IngestError(line, "unknown identifier type");
        e.identifier_types |= static_cast<std::uint8_t>(1u << index_of(*t));
      }
    }
    out.push_back(std::move(e));
  });
  return out;
}

}  // namespace biasflag
