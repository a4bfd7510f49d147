#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "fixtures.hpp"

using namespace gridquad;
using gridquad::testing::blank_document;
using gridquad::testing::worked_example;

namespace {

std::vector<std::string> codes(const ValidationReport& r) {
  std::vector<std::string> out;
  for (const auto& v : r) out.push_back(v.code);
  return out;
}

}  // namespace

TEST(Validate, WorkedExampleIsClean) { EXPECT_TRUE(validate_document(worked_example()).empty()); }

TEST(Validate, PosLengthMismatch) {
  Document d = worked_example();
  d.pos.pop_back();
  EXPECT_EQ(codes(validate_document(d)), std::vector<std::string>{"POS_LEN_MISMATCH"});
}

TEST(Validate, SpanOutOfRange) {
  Document d = worked_example();
  d.quadruples[0].opinion.end = 7;
  EXPECT_EQ(codes(validate_document(d)), std::vector<std::string>{"SPAN_OUT_OF_RANGE"});
}

TEST(Validate, EmptySpan) {
  Document d = worked_example();
  d.quadruples[0].aspect = Span{3, 3};
  EXPECT_EQ(codes(validate_document(d)), std::vector<std::string>{"SPAN_EMPTY"});
}

TEST(Validate, DependencyViolations) {
  Document d = worked_example();
  d.deps.push_back({2, 2, "x"});
  EXPECT_EQ(codes(validate_document(d)), std::vector<std::string>{"DEP_SELF_LOOP"});
  d = worked_example();
  d.deps.push_back({2, 6, "x"});
  EXPECT_EQ(codes(validate_document(d)), std::vector<std::string>{"DEP_OUT_OF_RANGE"});
}

TEST(Validate, SentencePartition) {
  Document d = worked_example();
  d.sentences = {{0, 3}, {4, 6}};
  EXPECT_EQ(codes(validate_document(d)), std::vector<std::string>{"SENTENCE_PARTITION"});
}

// Corrupting exactly one field of a valid document yields exactly that violation.
TEST(Validate, MutationProperty) {
  GenSpec g;
  g.doc_count = 50;
  const auto docs = synthesize_corpus(g, 3).documents;
  std::mt19937_64 rng(11);
  for (const auto& base : docs) {
    ASSERT_TRUE(validate_document(base).empty());
    const int n = base.size();
    const int kind = static_cast<int>(rng() % 5);
    Document d = base;
    std::string expected;
    switch (kind) {
      case 0:
        d.pos.push_back("X");
        expected = "POS_LEN_MISMATCH";
        break;
      case 1:
        d.sentences.back().end -= 1;
        expected = "SENTENCE_PARTITION";
        break;
      case 2:
        d.deps.push_back({n / 2, n / 2, "x"});
        expected = "DEP_SELF_LOOP";
        break;
      case 3:
        d.deps.push_back({0, n + 3, "x"});
        expected = "DEP_OUT_OF_RANGE";
        break;
      default:
        d.quadruples.front().opinion = {n, n + 1};
        expected = "SPAN_OUT_OF_RANGE";
        break;
    }
    EXPECT_EQ(codes(validate_document(d)), std::vector<std::string>{expected}) << base.doc_id;
  }
}

TEST(Corpus, JsonRoundTrip) {
  Corpus c{worked_example(), blank_document(3, "b")};
  c[1].quadruples = {{{0, 1}, std::nullopt, {2, 3}, Sentiment::neg}};
  std::stringstream ss;
  write_corpus(ss, c);
  EXPECT_EQ(read_corpus(ss), c);
}

TEST(Corpus, MalformedLineReportsLineNumber) {
  std::stringstream ss(to_json(worked_example()).dump() + "\n{not json\n");
  try {
    read_corpus(ss);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
}

TEST(Stats, WorkedExample) {
  const CorpusStats s = corpus_stats({worked_example()});
  EXPECT_EQ(s.doc_count, 1);
  EXPECT_EQ(s.sentence_count, 1);
  EXPECT_EQ(s.token_count, 6);
  EXPECT_EQ(s.quad_count, 1);
  for (Role r : kRoles) EXPECT_EQ(s.entity_counts.at(r), 1);
  for (RelationType r : kRelationTypes) EXPECT_EQ(s.relation_counts.at(r), 1);
  EXPECT_EQ(s.sentiment_counts.at(Sentiment::pos), 1);
  EXPECT_EQ(s.sentiment_counts.at(Sentiment::neg), 0);
}

TEST(Stats, EmptyCorpus) { EXPECT_EQ(corpus_stats({}), CorpusStats{}); }

TEST(Stats, MatchesPlantedTruth) {
  GenSpec g;
  g.doc_count = 100;
  const auto s = synthesize_corpus(g, 7);
  const CorpusStats st = corpus_stats(s.documents);
  EXPECT_EQ(st, s.truth.stats);
  EXPECT_EQ(st.relation_counts.at(RelationType::to), st.quad_count);
}

TEST(Stats, AdditiveOverConcatenation) {
  GenSpec g;
  g.doc_count = 40;
  const auto a = synthesize_corpus(g, 1).documents;
  const auto b = synthesize_corpus(g, 2).documents;
  Corpus ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  EXPECT_EQ(corpus_stats(ab), corpus_stats(a) + corpus_stats(b));
}

TEST(Stats, RejectsInvalidDocument) {
  Document d = worked_example();
  d.pos.pop_back();
  EXPECT_THROW(corpus_stats({d}), ValidationError);
}

TEST(Analysis, SingleSentenceHasNoCrossLinks) {
  const auto r = distribution_analysis({worked_example()});
  for (RelationType t : kRelationTypes) EXPECT_EQ(r.cross_sentence_ratio.at(t), 0.0);
}

TEST(Analysis, CrossSentenceTargetOpinion) {
  Document d = blank_document(6);
  d.sentences = {{0, 3}, {3, 6}};
  d.quadruples = {{{0, 1}, std::nullopt, {4, 5}, Sentiment::pos}};
  const auto r = distribution_analysis({d});
  EXPECT_EQ(r.cross_sentence_ratio.at(RelationType::to), 1.0);
}

TEST(Analysis, PlantedCrossSentenceRatioIsExact) {
  GenSpec g;
  g.doc_count = 200;
  g.cross_sentence_fraction = 0.3;
  g.null_aspect_fraction = 0.0;
  const auto s = synthesize_corpus(g, 7);
  const auto r = distribution_analysis(s.documents);
  EXPECT_DOUBLE_EQ(r.cross_sentence_ratio.at(RelationType::to), std::round(0.3 * s.truth.stats.quad_count) /
                                                                   static_cast<double>(s.truth.stats.quad_count));
  for (RelationType t : kRelationTypes) {
    EXPECT_EQ(r.relation_total.at(t), s.truth.relation_total.at(t));
    EXPECT_EQ(r.relation_cross.at(t), s.truth.relation_cross.at(t));
  }
}

TEST(Analysis, HistogramsCoverEveryDocument) {
  GenSpec g;
  g.doc_count = 120;
  g.min_length = 5;
  g.max_length = 130;
  const auto r = distribution_analysis(synthesize_corpus(g, 5).documents);
  long len = 0, quads = 0;
  for (const auto& [bin, c] : r.doc_length_histogram) len += c;
  for (const auto& [bin, c] : r.quad_count_histogram) quads += c;
  EXPECT_EQ(len, 120);
  EXPECT_EQ(quads, 120);
  EXPECT_EQ(doc_length_bin(9), 0u);
  EXPECT_EQ(doc_length_bins()[doc_length_bin(10)], "10-19");
  EXPECT_EQ(doc_length_bins()[doc_length_bin(250)], "100+");
}
