#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "biasflag/corpus.hpp"
#include "biasflag/random.hpp"
#include "biasflag/synthetic.hpp"

using namespace biasflag;

namespace {

// Independent reference for the cleaning rules on NFC-stable input.
std::string reference_clean(std::string s) {
  static const std::regex tag("<[A-Za-z/!?][^>]*>");
  s = std::regex_replace(s, tag, " ");
  const std::pair<std::string, std::string> table[] = {
      {"\xe2\x80\x9c", "\""}, {"\xe2\x80\x9d", "\""}, {"\xe2\x80\x9e", "\""},
      {"\xe2\x80\x9f", "\""}, {"\xe2\x80\x98", "'"},  {"\xe2\x80\x99", "'"},
      {"\xe2\x80\x9a", "'"},  {"\xe2\x80\x9b", "'"},  {"\xc2\xa0", " "},
      {"\xe2\x80\xaf", " "},  {"\xe2\x81\x9f", " "},  {"\xe3\x80\x80", " "}};
  std::vector<std::pair<std::string, std::string>> all(std::begin(table), std::end(table));
  for (char c = '\x80'; c != '\x8b'; ++c) all.push_back({std::string("\xe2\x80") + c, " "});
  for (const auto& [from, to] : all) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
      s.replace(pos, from.size(), to);
  }
  std::istringstream in(s);
  std::string w, out;
  while (in >> w) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::string random_text(Rng& rng) {
  static const std::vector<std::string> frags = {
      "a", "Bc", " ", "  ", "\t", "\n", "<", ">", "/", "!", "<b>", "</i>", "<p class=x>",
      "\xe2\x80\x9c", "\xe2\x80\x9d", "\xe2\x80\x98", "\xe2\x80\x99", "\xc2\xa0",
      "\xe3\x80\x80", "\xe2\x80\x83", "\xc3\xa9", "x", "<<", "?", "<!-- c -->", "1", "-"};
  std::string s;
  const auto n = rng.below(25);
  for (std::uint64_t i = 0; i < n; ++i) s += rng.pick(frags);
  return s;
}

}  // namespace

TEST(CleanText, SpecExamples) {
  EXPECT_EQ(clean_text("<b>Race</b>  and   health"), "Race and health");
  EXPECT_EQ(clean_text("plain text"), "plain text");
  EXPECT_EQ(clean_text("a \xe2\x80\x9cquote\xe2\x80\x9d\n\n b"), "a \"quote\" b");
}

TEST(CleanText, EdgeCases) {
  EXPECT_EQ(clean_text(""), "");
  EXPECT_EQ(clean_text("   \n\t "), "");
  EXPECT_EQ(clean_text("BMI > 30 and < 40"), "BMI > 30 and < 40");
  EXPECT_EQ(clean_text("x<a"), "x<a");
  EXPECT_EQ(clean_text("line<br/>break"), "line break");
}

TEST(CleanText, ComposesToNfc) {
  // "e" + combining acute -> precomposed U+00E9
  EXPECT_EQ(clean_text("cafe\xcc\x81"), "caf\xc3\xa9");
}

TEST(CleanText, MatchesReferenceAndIsIdempotent) {
  Rng rng(2024);
  for (int i = 0; i < 3000; ++i) {
    const auto raw = random_text(rng);
    const auto once = clean_text(raw);
    ASSERT_EQ(once, reference_clean(raw)) << "input: " << raw;
    ASSERT_EQ(clean_text(once), once) << "input: " << raw;
  }
}

TEST(IngestAnnotations, CodedQuoteRecord) {
  std::istringstream in(
      R"({"quote_id":"q1","doc_id":"D1","page_no":3,"codes":["female","potential bias","sex-disease"],"text":"...adolescent females with BMI > 30...","annotator_id":"A1"})"
      "\n");
  const auto qs = ingest_annotations(in);
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(qs[0].codes.size(), 3u);
  EXPECT_EQ(qs[0].quote_id, "q1");
  EXPECT_EQ(qs[0].page_no, 3);
  EXPECT_EQ(qs[0].text, "...adolescent females with BMI > 30...");
}

TEST(IngestAnnotations, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(ingest_annotations(in).empty());
}

TEST(IngestAnnotations, MissingCodesNamesLine) {
  std::istringstream in(
      R"({"quote_id":"q1","doc_id":"D1","page_no":1,"codes":["bias"],"text":"t"})"
      "\n"
      R"({"quote_id":"q2","doc_id":"D1","page_no":1,"text":"t"})"
      "\n");
  try {
    ingest_annotations(in);
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(IngestAnnotations, DuplicateIdAndMalformed) {
  std::istringstream dup(
      R"({"quote_id":"q1","doc_id":"D1","page_no":1,"codes":["bias"],"text":"t"})"
      "\n"
      R"({"quote_id":"q1","doc_id":"D1","page_no":2,"codes":["bias"],"text":"u"})"
      "\n");
  EXPECT_THROW(ingest_annotations(dup), DuplicateIdError);
  std::istringstream bad("{not json}\n");
  EXPECT_THROW(ingest_annotations(bad), IngestError);
  std::istringstream empty_codes(R"({"quote_id":"q1","doc_id":"D1","page_no":1,"codes":[],"text":"t"})");
  EXPECT_THROW(ingest_annotations(empty_codes), IngestError);
}

TEST(IngestAnnotations, OrderPreservedAndCodesDeduped) {
  std::istringstream in(
      R"({"quote_id":"b","doc_id":"D2","page_no":1,"codes":["Bias"," bias ","race-disease"],"text":"<i>x</i> y"})"
      "\n\n"
      R"({"quote_id":"a","doc_id":"D1","page_no":1,"codes":["non-bias"],"text":"z"})"
      "\n");
  const auto qs = ingest_annotations(in);
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0].quote_id, "b");
  EXPECT_EQ(qs[0].codes.size(), 2u);
  EXPECT_EQ(qs[0].text, "x y");
}

TEST(IngestDocuments, SortsAndValidates) {
  std::istringstream in(
      R"({"doc_id":"D1","page_no":2,"text":"second"})"
      "\n"
      R"({"doc_id":"D1","page_no":1,"text":"first"})"
      "\n");
  const auto pages = ingest_documents(in);
  ASSERT_EQ(pages.size(), 2u);
  EXPECT_EQ(pages[0].page_no, 1);
  EXPECT_EQ(pages[1].text, "second");

  std::istringstream empty("");
  EXPECT_TRUE(ingest_documents(empty).empty());
  std::istringstream zero(R"({"doc_id":"D1","page_no":0,"text":"x"})");
  EXPECT_THROW(ingest_documents(zero), ValidationError);
}

TEST(CorpusStats, EmptyAndSynthetic) {
  EXPECT_EQ(corpus_stats({}, {}, 0), CorpusStats{});

  SyntheticSpec spec;
  spec.n_docs = 1;
  spec.n_pages = 10;
  spec.filler_per_page = 3;
  spec.positives = {2, 0, 1, 0, 0, 0};
  spec.explicit_negatives = {0, 1, 0, 0, 0, 0};
  const auto sc = generate_synthetic_corpus(spec, 5);
  const auto st = corpus_stats(sc.pages, sc.quotes, 0);
  EXPECT_EQ(st.n_files, 1u);
  EXPECT_EQ(st.n_pages, 10u);
  EXPECT_EQ(st.n_annotated, 4u);
  EXPECT_EQ(st.n_annotated_pos, 3u);
  EXPECT_EQ(st.n_annotated_neg, 1u);
}

TEST(Jsonl, RoundTripThroughIngest) {
  AnnotatedQuote q{"q9", "D3", 4, "some text", {"bias", "age-disease"}, "why", "A2", std::nullopt};
  std::ostringstream out;
  write_jsonl(out, std::vector<AnnotatedQuote>{q});
  std::istringstream in(out.str());
  const auto back = ingest_annotations(in);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], q);
}
