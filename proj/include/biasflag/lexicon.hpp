#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "biasflag/codes.hpp"
#include "biasflag/common.hpp"
#include "biasflag/corpus.hpp"
#include "biasflag/default_lexicon.hpp"

namespace biasflag {

struct Lexicon {
  // Sorted, deduplicated, lowercase phrases per bias type.
  std::array<std::vector<std::string>, kNumBiasTypes> terms;
  // Rule-based numeric age expressions ("over 40", "45-year-old").
  bool numeric_age = true;

  const std::vector<std::string>& of(BiasType t) const { return terms[index_of(t)]; }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& v : terms) n += v.size();
    return n;
  }
};

struct IdentifierMatch {
  BiasType type{};
  std::string term;
  std::size_t start = 0;  // byte offsets into the sentence
  std::size_t end = 0;

  friend bool operator==(const IdentifierMatch&, const IdentifierMatch&) = default;
};

struct Sentence {
  std::string text;
  std::size_t start = 0;  // byte span in the page text
  std::size_t end = 0;
};

struct NegativeExample {
  std::string text;
  NegativeKind kind = NegativeKind::XN;
  std::vector<IdentifierMatch> matches;
  std::string doc_id;
  int page_no = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

inline Lexicon load_lexicon(std::istream& in) {
  std::array<std::set<std::string>, kNumBiasTypes> sets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IngestError(line_no, "expected '<type>\\t<phrase>'");
    const std::string type_name = to_lower_ascii(trim(std::string_view(line).substr(0, tab)));
    const auto type = parse_bias_type(type_name);
    if (!type) throw IngestError(line_no, "unknown bias type '" + type_name + "'");
    const std::string_view raw_phrase = std::string_view(line).substr(tab + 1);
    if (line.find('\t', tab + 1) != std::string::npos)
      throw IngestError(line_no, "phrase contains a tab");
    const std::string phrase = normalize_for_match(raw_phrase);
    if (phrase.empty()) throw IngestError(line_no, "empty phrase for type '" + type_name + "'");
    const auto words = split_whitespace(phrase).size();
    if (words > 4) throw IngestError(line_no, "phrase longer than 4 words");
    sets[index_of(*type)].insert(phrase);
  }
  Lexicon lex;
  for (std::size_t i = 0; i < kNumBiasTypes; ++i)
    lex.terms[i].assign(sets[i].begin(), sets[i].end());
  return lex;
}

inline Lexicon default_lexicon() {
  std::istringstream in{std::string(kDefaultLexiconTsv)};
  return load_lexicon(in);
}

// ---------------------------------------------------------------------------
// Sentence segmentation
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_abbreviation(std::string_view word) {
  const std::string word_lower = to_lower_ascii(word);
  static const std::set<std::string, std::less<>> kStop = {
      "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "vs", "e.g", "i.e", "fig", "figs",
      "no", "approx", "al", "inc", "ltd", "dept", "vol", "pp", "ca", "cf", "mt", "ref", "eq"};
  if (kStop.count(word_lower)) return true;
  // Single-letter initials ("J. Smith").
  return word.size() == 1 && word[0] >= 'A' && word[0] <= 'Z';
}

inline bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

inline bool starts_sentence(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '"' || c == '\'' ||
         c == '(' || c == '[' || c >= 0x80;
}

}  // namespace detail

inline std::vector<Sentence> segment_text(std::string_view text) {
  std::vector<Sentence> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b >= e) return;
    const auto piece = text.substr(b, e - b);
    if (split_whitespace(piece).size() < 3) return;
    out.push_back({std::string(piece), b, e});
  };

  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
    while (j < text.size() && detail::is_closer(text[j])) ++j;
    bool boundary = false;
    if (j >= text.size()) {
      boundary = true;
    } else if (is_space(static_cast<unsigned char>(text[j]))) {
      std::size_t k = j;
      while (k < text.size() && is_space(static_cast<unsigned char>(text[k]))) ++k;
      boundary = k >= text.size() || detail::starts_sentence(static_cast<unsigned char>(text[k]));
    }
    if (boundary && c == '.' && j == i + 1) {
      std::size_t w = i;
      while (w > begin && !is_space(static_cast<unsigned char>(text[w - 1])) && text[w - 1] != '(' &&
             text[w - 1] != '"')
        --w;
      if (detail::is_abbreviation(text.substr(w, i - w))) boundary = false;
    }
    if (boundary) {
      emit(begin, j);
      begin = j;
    }
    i = j;
  }
  emit(begin, text.size());
  return out;
}

inline std::vector<Sentence> segment_sentences(const DocumentPage& page) {
  return segment_text(page.text);
}

// ---------------------------------------------------------------------------
// Identifier matching
// ---------------------------------------------------------------------------

namespace detail {

inline bool word_start(std::string_view s, std::size_t i) {
  return i == 0 || !is_ascii_alnum(static_cast<unsigned char>(s[i - 1]));
}
inline bool word_end(std::string_view s, std::size_t e) {
  return e >= s.size() || !is_ascii_alnum(static_cast<unsigned char>(s[e]));
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Numeric age expressions over an ASCII-lowercased sentence.
inline void numeric_age_candidates(std::string_view s, std::vector<IdentifierMatch>& out) {
  static constexpr std::string_view kPrefixes[] = {"over ", "under ", "aged ", "age ",
                                                   "above ", "below ", "older than ",
                                                   "younger than "};
  static constexpr std::string_view kSuffixes[] = {
      "-year-old", " year-old", "-years-old", " years old", " year old", " years of age",
      " years",    " year",     " yo",        "-yo",        "-month-old", " months old"};
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_digit(s[i]) || !word_start(s, i)) continue;
    std::size_t e = i;
    while (e < s.size() && is_digit(s[e])) ++e;
    if (!word_end(s, e)) continue;
    auto push = [&](std::size_t b, std::size_t en) {
      out.push_back({BiasType::age, std::string(s.substr(b, en - b)), b, en});
    };
    for (auto p : kPrefixes) {
      if (i >= p.size() && s.substr(i - p.size(), p.size()) == p && word_start(s, i - p.size()))
        push(i - p.size(), e);
    }
    for (auto suf : kSuffixes) {
      if (s.substr(e, suf.size()) == suf && word_end(s, e + suf.size())) push(i, e + suf.size());
    }
  }
}

inline bool overlaps(const IdentifierMatch& a, const IdentifierMatch& b) {
  return a.start < b.end && b.start < a.end;
}

// Longest match wins; equal-extent matches of different types are all kept.
inline std::vector<IdentifierMatch> select_longest(std::vector<IdentifierMatch> cands) {
  std::sort(cands.begin(), cands.end(), [](const IdentifierMatch& a, const IdentifierMatch& b) {
    const auto la = a.end - a.start, lb = b.end - b.start;
    return std::tuple(lb, a.start, a.type, a.term) < std::tuple(la, b.start, b.type, b.term);
  });
  std::vector<IdentifierMatch> chosen;
  for (auto& c : cands) {
    bool ok = true;
    for (const auto& k : chosen) {
      if (!overlaps(c, k)) continue;
      if (k.start == c.start && k.end == c.end && k.type != c.type) continue;
      ok = false;
      break;
    }
    if (ok) chosen.push_back(std::move(c));
  }
  std::sort(chosen.begin(), chosen.end(), [](const IdentifierMatch& a, const IdentifierMatch& b) {
    return std::tie(a.start, a.type) < std::tie(b.start, b.type);
  });
  return chosen;
}

}  // namespace detail

inline std::vector<IdentifierMatch> find_identifiers(std::string_view sentence, const Lexicon& lex) {
  const std::string s = to_lower_ascii(sentence);
  std::vector<IdentifierMatch> cands;
  for (BiasType t : kBiasTypes) {
    for (const auto& term : lex.of(t)) {
      std::size_t pos = s.find(term);
      while (pos != std::string::npos) {
        const std::size_t end = pos + term.size();
        if (detail::word_start(s, pos) && detail::word_end(s, end))
          cands.push_back({t, term, pos, end});
        pos = s.find(term, pos + 1);
      }
    }
  }
  if (lex.numeric_age) detail::numeric_age_candidates(s, cands);
  return detail::select_longest(std::move(cands));
}

inline std::uint8_t identifier_mask(const std::vector<IdentifierMatch>& matches) {
  std::uint8_t m = 0;
  for (const auto& x : matches) m |= static_cast<std::uint8_t>(1u << index_of(x.type));
  return m;
}

// ---------------------------------------------------------------------------
// Negatives
// ---------------------------------------------------------------------------

inline NegativeKind categorize_negative(const AnnotatedQuote& q) {
  if (has_positive_code(q.codes))
    throw ContractError("categorize_negative called on positive quote '" + q.quote_id + "'");
  return negative_kind_for_codes(q.codes);
}

namespace detail {

inline std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_ascii_alnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80) {
      cur.push_back(ascii_lower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::set<std::string> shingles(const std::vector<std::string>& toks, std::size_t n) {
  std::set<std::string> out;
  if (toks.size() < n || n == 0) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key.push_back(' ');
      key += toks[i + k];
    }
    out.insert(std::move(key));
  }
  return out;
}

inline constexpr std::size_t kShingleSize = 8;
inline constexpr double kShingleOverlap = 0.8;

// Fallback overlap test when a quote is not a verbatim substring of its page.
inline bool shingle_overlap(std::string_view quote, std::string_view sentence) {
  const auto tq = word_tokens(quote);
  const auto ts = word_tokens(sentence);
  const std::size_t n = std::min({kShingleSize, tq.size(), ts.size()});
  if (n == 0) return false;
  const auto a = shingles(tq, n);
  const auto b = shingles(ts, n);
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) >= kShingleOverlap * static_cast<double>(std::min(a.size(), b.size()));
}

}  // namespace detail

// Sentences from unannotated page text that mention at least one identifier.
inline std::vector<NegativeExample> extract_xn(const std::vector<DocumentPage>& pages,
                                               const std::vector<AnnotatedQuote>& quotes,
                                               const Lexicon& lex) {
  std::map<std::pair<std::string, int>, std::vector<const AnnotatedQuote*>> by_page;
  for (const auto& q : quotes) by_page[{q.doc_id, q.page_no}].push_back(&q);

  std::vector<NegativeExample> out;
  for (const auto& page : pages) {
    const std::string page_lower = to_lower_ascii(page.text);
    std::vector<std::pair<std::size_t, std::size_t>> quote_spans;
    std::vector<std::string_view> unmatched;
    if (auto it = by_page.find({page.doc_id, page.page_no}); it != by_page.end()) {
      for (const AnnotatedQuote* q : it->second) {
        const std::string needle = to_lower_ascii(q->text);
        std::size_t pos = page_lower.find(needle);
        if (pos == std::string::npos) {
          unmatched.push_back(q->text);
          continue;
        }
        while (pos != std::string::npos) {
          quote_spans.emplace_back(pos, pos + needle.size());
          pos = page_lower.find(needle, pos + 1);
        }
      }
    }
    for (auto& s : segment_sentences(page)) {
      bool annotated = false;
      for (auto [qb, qe] : quote_spans) {
        if (s.start < qe && qb < s.end) {
          annotated = true;
          break;
        }
      }
      for (auto q : unmatched) {
        if (annotated) break;
        annotated = detail::shingle_overlap(q, s.text);
      }
      if (annotated) continue;
      auto matches = find_identifiers(s.text, lex);
      if (matches.empty()) continue;
      out.push_back({std::move(s.text), NegativeKind::XN, std::move(matches), page.doc_id,
                     page.page_no, s.start, s.end});
    }
  }
  return out;
}

}  // namespace biasflag
