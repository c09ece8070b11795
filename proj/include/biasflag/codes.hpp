#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biasflag/common.hpp"

namespace biasflag {

// Annotation code vocabulary. Codes are compared after trimming and ASCII
// lowercasing since annotators typed them by hand.

enum class NegativeKind : std::uint8_t { EN, IN, RN, XN };

inline std::string_view to_string(NegativeKind k) noexcept {
  switch (k) {
    case NegativeKind::EN: return "EN";
    case NegativeKind::IN: return "IN";
    case NegativeKind::RN: return "RN";
    case NegativeKind::XN: return "XN";
  }
  return "?";
}

inline std::optional<NegativeKind> parse_negative_kind(std::string_view s) noexcept {
  if (s == "EN") return NegativeKind::EN;
  if (s == "IN") return NegativeKind::IN;
  if (s == "RN") return NegativeKind::RN;
  if (s == "XN") return NegativeKind::XN;
  return std::nullopt;
}

inline std::string normalize_code(std::string_view code) { return to_lower_ascii(trim(code)); }

inline constexpr std::string_view kDiseaseSuffix = "-disease";
inline constexpr std::string_view kNonBiasCode = "non-bias";

inline bool is_positive_code(std::string_view code) {
  const std::string c = normalize_code(code);
  return c == "bias" || c == "potential bias" || c == "review";
}

inline bool is_disease_code(std::string_view code) {
  const std::string c = normalize_code(code);
  return c.size() > kDiseaseSuffix.size() && c.ends_with(kDiseaseSuffix);
}

inline std::string type_code(BiasType t) {
  return std::string(to_string(t)) + std::string(kDiseaseSuffix);
}

inline bool has_positive_code(const std::vector<std::string>& codes) {
  for (const auto& c : codes)
    if (is_positive_code(c)) return true;
  return false;
}

inline bool has_type_code(const std::vector<std::string>& codes, BiasType t) {
  const std::string want = type_code(t);
  for (const auto& c : codes)
    if (normalize_code(c) == want) return true;
  return false;
}

inline bool has_any_known_type_code(const std::vector<std::string>& codes) {
  for (BiasType t : kBiasTypes)
    if (has_type_code(codes, t)) return true;
  return false;
}

inline bool has_disease_code(const std::vector<std::string>& codes) {
  for (const auto& c : codes)
    if (is_disease_code(c)) return true;
  return false;
}

inline bool has_non_bias_code(const std::vector<std::string>& codes) {
  for (const auto& c : codes)
    if (normalize_code(c) == kNonBiasCode) return true;
  return false;
}

// EN / IN / RN rule for a label-0 code set. Caller guarantees the set has no
// positive code.
inline NegativeKind negative_kind_for_codes(const std::vector<std::string>& codes) {
  const bool disease = has_disease_code(codes);
  if (disease && has_non_bias_code(codes)) return NegativeKind::EN;
  if (disease) return NegativeKind::IN;
  return NegativeKind::RN;
}

}  // namespace biasflag
