#pragma once

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "biasflag/codes.hpp"
#include "biasflag/common.hpp"
#include "json.hpp"

namespace biasflag {

struct DocumentPage {
  std::string doc_id;
  int page_no = 1;
  std::string text;

  friend bool operator==(const DocumentPage&, const DocumentPage&) = default;
};

struct AnnotatedQuote {
  std::string quote_id;
  std::string doc_id;
  int page_no = 1;
  std::string text;
  std::vector<std::string> codes;
  std::optional<std::string> comment;
  std::string annotator_id;
  // Reserved; nothing consumes it yet.
  std::optional<std::string> timestamp;

  friend bool operator==(const AnnotatedQuote&, const AnnotatedQuote&) = default;
};

struct CorpusStats {
  std::size_t n_files = 0;
  std::size_t n_pages = 0;
  std::size_t n_annotated = 0;
  std::size_t n_annotated_pos = 0;
  std::size_t n_annotated_neg = 0;
  std::size_t n_extracted_neg = 0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

// ---------------------------------------------------------------------------
// Text cleaning
// ---------------------------------------------------------------------------

namespace detail {

inline std::string nfc(std::string_view raw) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

inline bool opens_tag(std::string_view s, std::size_t i) {
  if (s[i] != '<' || i + 1 >= s.size()) return false;
  const char n = s[i + 1];
  return (n >= 'a' && n <= 'z') || (n >= 'A' && n <= 'Z') || n == '/' || n == '!' || n == '?';
}

inline std::string strip_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (opens_tag(s, i)) {
      // Without a closing '>' it is not a tag; keeping it literal keeps the
      // rule idempotent ("<<a" would otherwise shrink on every pass).
      const std::size_t close = s.find('>', i + 1);
      if (close != std::string_view::npos) {
        out.push_back(' ');
        i = close + 1;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

// Length in bytes of a UTF-8 sequence at s[i] that should become `out`.
inline std::size_t match_mapped(std::string_view s, std::size_t i, char& out) {
  struct Mapping {
    std::string_view from;
    char to;
  };
  static constexpr Mapping kQuotes[] = {
      {"\xe2\x80\x9c", '"'},  {"\xe2\x80\x9d", '"'},  {"\xe2\x80\x9e", '"'},
      {"\xe2\x80\x9f", '"'},  {"\xe2\x80\x98", '\''}, {"\xe2\x80\x99", '\''},
      {"\xe2\x80\x9a", '\''}, {"\xe2\x80\x9b", '\''},
  };
  // U+00A0, U+2000..U+200A, U+202F, U+205F, U+3000
  static constexpr std::string_view kSpaces[] = {
      "\xc2\xa0",     "\xe2\x80\x80", "\xe2\x80\x81", "\xe2\x80\x82", "\xe2\x80\x83",
      "\xe2\x80\x84", "\xe2\x80\x85", "\xe2\x80\x86", "\xe2\x80\x87", "\xe2\x80\x88",
      "\xe2\x80\x89", "\xe2\x80\x8a", "\xe2\x80\xaf", "\xe2\x81\x9f", "\xe3\x80\x80",
  };
  const std::string_view rest = s.substr(i);
  for (const auto& m : kQuotes) {
    if (rest.starts_with(m.from)) {
      out = m.to;
      return m.from.size();
    }
  }
  for (auto sp : kSpaces) {
    if (rest.starts_with(sp)) {
      out = ' ';
      return sp.size();
    }
  }
  return 0;
}

inline std::string map_quotes_and_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    char mapped = 0;
    if (static_cast<unsigned char>(s[i]) >= 0x80) {
      if (std::size_t n = match_mapped(s, i, mapped)) {
        out.push_back(mapped);
        i += n;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Ordered rule list: NFC, markup tags, typographic quotes and exotic spaces,
// whitespace collapse and trim. Total and idempotent.
inline std::string clean_text(std::string_view raw) {
  std::string s = detail::nfc(raw);
  s = detail::strip_tags(s);
  s = detail::map_quotes_and_spaces(s);
  return detail::collapse_whitespace(s);
}

// ---------------------------------------------------------------------------
// Line-delimited ingestion
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IngestError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw IngestError(line_no, "record is not an object");
    fn(rec, line_no);
  }
}

inline std::string require_string(const nlohmann::json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) throw IngestError(line, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw IngestError(line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& rec, const char* key,
                                                  std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw IngestError(line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

inline int require_page(const nlohmann::json& rec, std::size_t line) {
  auto it = rec.find("page_no");
  if (it == rec.end()) throw IngestError(line, "missing field 'page_no'");
  if (!it->is_number_integer()) throw IngestError(line, "field 'page_no' must be an integer");
  const auto v = it->get<long long>();
  if (v < 1) throw ValidationError("line " + std::to_string(line) + ": page_no must be >= 1");
  if (v > 1'000'000'000) throw IngestError(line, "page_no out of range");
  return static_cast<int>(v);
}

}  // namespace detail

inline std::vector<AnnotatedQuote> ingest_annotations(std::istream& in) {
  std::vector<AnnotatedQuote> out;
  std::unordered_set<std::string> seen;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    AnnotatedQuote q;
    q.quote_id = detail::require_string(rec, "quote_id", line);
    if (q.quote_id.empty()) throw IngestError(line, "empty quote_id");
    q.doc_id = detail::require_string(rec, "doc_id", line);
    if (q.doc_id.empty()) throw IngestError(line, "empty doc_id");
    q.page_no = detail::require_page(rec, line);
    q.text = clean_text(detail::require_string(rec, "text", line));
    if (q.text.empty()) throw IngestError(line, "text is empty after cleaning");

    auto codes = rec.find("codes");
    if (codes == rec.end()) throw IngestError(line, "missing field 'codes'");
    if (!codes->is_array()) throw IngestError(line, "field 'codes' must be an array");
    std::set<std::string> uniq;
    for (const auto& c : *codes) {
      if (!c.is_string()) throw IngestError(line, "codes must be strings");
      auto s = c.get<std::string>();
      if (trim(s).empty()) continue;
      if (uniq.insert(normalize_code(s)).second) q.codes.push_back(std::move(s));
    }
    if (q.codes.empty()) throw IngestError(line, "codes must be non-empty");

    q.comment = detail::optional_string(rec, "comment", line);
    q.annotator_id = detail::optional_string(rec, "annotator_id", line).value_or("");
    q.timestamp = detail::optional_string(rec, "timestamp", line);

    if (!seen.insert(q.quote_id).second)
      throw DuplicateIdError("line " + std::to_string(line) + ": duplicate quote_id '" +
                             q.quote_id + "'");
    out.push_back(std::move(q));
  });
  return out;
}

inline std::vector<DocumentPage> ingest_documents(std::istream& in) {
  std::vector<DocumentPage> out;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    DocumentPage p;
    p.doc_id = detail::require_string(rec, "doc_id", line);
    if (p.doc_id.empty()) throw IngestError(line, "empty doc_id");
    p.page_no = detail::require_page(rec, line);
    p.text = clean_text(detail::require_string(rec, "text", line));
    out.push_back(std::move(p));
  });
  std::stable_sort(out.begin(), out.end(), [](const DocumentPage& a, const DocumentPage& b) {
    return std::tie(a.doc_id, a.page_no) < std::tie(b.doc_id, b.page_no);
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].doc_id == out[i - 1].doc_id && out[i].page_no == out[i - 1].page_no)
      throw DuplicateIdError("duplicate page " + out[i].doc_id + ":" +
                             std::to_string(out[i].page_no));
  }
  return out;
}

inline nlohmann::json to_json(const AnnotatedQuote& q) {
  nlohmann::json j = {{"quote_id", q.quote_id}, {"doc_id", q.doc_id},
                      {"page_no", q.page_no},   {"text", q.text},
                      {"codes", q.codes},       {"annotator_id", q.annotator_id}};
  j["comment"] = q.comment ? nlohmann::json(*q.comment) : nlohmann::json(nullptr);
  if (q.timestamp) j["timestamp"] = *q.timestamp;
  return j;
}

inline nlohmann::json to_json(const DocumentPage& p) {
  return {{"doc_id", p.doc_id}, {"page_no", p.page_no}, {"text", p.text}};
}

template <typename Range>
void write_jsonl(std::ostream& out, const Range& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

// Table-1 style counts. Positive / negative split uses the general label rule.
inline CorpusStats corpus_stats(const std::vector<DocumentPage>& pages,
                                const std::vector<AnnotatedQuote>& quotes,
                                std::size_t n_extracted_negatives) {
  CorpusStats s;
  std::set<std::string> docs;
  for (const auto& p : pages) docs.insert(p.doc_id);
  for (const auto& q : quotes) docs.insert(q.doc_id);
  s.n_files = docs.size();
  s.n_pages = pages.size();
  s.n_annotated = quotes.size();
  for (const auto& q : quotes) {
    if (has_positive_code(q.codes))
      ++s.n_annotated_pos;
    else
      ++s.n_annotated_neg;
  }
  s.n_extracted_neg = n_extracted_negatives;
  return s;
}

inline nlohmann::json to_json(const CorpusStats& s) {
  return {{"n_files", s.n_files},
          {"n_pages", s.n_pages},
          {"n_annotated", s.n_annotated},
          {"n_annotated_pos", s.n_annotated_pos},
          {"n_annotated_neg", s.n_annotated_neg},
          {"n_extracted_neg", s.n_extracted_neg}};
}

}  // namespace biasflag
