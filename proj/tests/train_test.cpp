#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace gridquad;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.h_x = 8;
  c.h_p = 4;
  c.h_s = 8;
  c.h_e = 6;
  c.h_r = 4;
  c.epochs = 3;
  c.dropout = 0.2;
  c.seed = 5;
  return c;
}

Corpus tiny_corpus(int docs, std::uint64_t seed) {
  GenSpec g;
  g.doc_count = docs;
  g.min_length = 8;
  g.max_length = 14;
  g.max_quads = 2;
  return synthesize_corpus(g, seed).documents;
}

bool same_params(const ModelParams<double>& a, const ModelParams<double>& b) {
  std::vector<Mat<double>> va, vb;
  a.for_each([&](const std::string&, const Mat<double>& m) { va.push_back(m); });
  b.for_each([&](const std::string&, const Mat<double>& m) { vb.push_back(m); });
  return va == vb;
}

}  // namespace

TEST(Config, DefaultsAndMerge) {
  const TrainConfig d;
  EXPECT_EQ(d.learning_rate, 1e-3);
  EXPECT_EQ(d.epochs, 15);
  EXPECT_EQ(d.h_p, 20);
  EXPECT_EQ(d.h_s, 512);
  EXPECT_EQ(d.h_e, 256);
  EXPECT_EQ(d.h_r, 50);
  EXPECT_EQ(d.dropout, 0.5);
  const TrainConfig m = merge_config(d, json{{"epochs", 3}, {"use_pos", false}});
  EXPECT_EQ(m.epochs, 3);
  EXPECT_FALSE(m.use_pos);
  EXPECT_EQ(merge_config(d, to_json(m)), m);
  EXPECT_THROW(merge_config(d, json{{"epoch", 3}}), DataError);
  EXPECT_THROW(merge_config(d, json{{"epochs", "many"}}), DataError);
}

TEST(Config, Validation) {
  TrainConfig c;
  c.dropout = 1.0;
  EXPECT_THROW(validate_config(c), ContractError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(validate_config(c), ContractError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = init_params<double>({3, 2, 2, 2, 2, 2, 2}, 1);
  const auto before = p;
  auto g = zeros_like(p);
  g.gcn.setConstant(-3.0);
  Adam adam(p, 0.01);
  adam.step(p, g);
  EXPECT_NEAR((p.gcn - before.gcn).maxCoeff(), 0.01, 1e-9);
  EXPECT_NEAR((p.gcn - before.gcn).minCoeff(), 0.01, 1e-9);
  EXPECT_EQ(p.skip, before.skip);
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
  TrainConfig c = tiny_config();
  c.epochs = 0;
  const auto docs = tiny_corpus(4, 1);
  const auto r = train(docs, {}, c);
  EXPECT_TRUE(r.log.epochs.empty());
  EXPECT_TRUE(same_params(r.model.params, init_params<double>(r.model.params.dims, c.seed)));
}

TEST(Train, DeterministicForSameSeed) {
  const auto docs = tiny_corpus(6, 2);
  const auto a = train(docs, docs, tiny_config());
  const auto b = train(docs, docs, tiny_config());
  EXPECT_TRUE(same_params(a.model.params, b.model.params));
  ASSERT_EQ(a.log.epochs.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(a.log.epochs[e].loss, b.log.epochs[e].loss);
}

TEST(Train, CallbackStopsEarly) {
  const auto docs = tiny_corpus(4, 3);
  TrainConfig c = tiny_config();
  c.epochs = 10;
  int seen = 0;
  const auto r = train(docs, docs, c, [&](const EpochRecord& rec, const Model&) {
    ++seen;
    return rec.epoch < 2;
  });
  EXPECT_EQ(seen, 2);
  EXPECT_EQ(r.log.epochs.size(), 2u);
}

TEST(Train, LossDecreases) {
  const auto docs = tiny_corpus(6, 4);
  TrainConfig c = tiny_config();
  c.epochs = 8;
  c.dropout = 0;
  c.learning_rate = 5e-3;
  const auto r = train(docs, {}, c);
  EXPECT_LT(r.log.epochs.back().loss, r.log.epochs.front().loss);
}

TEST(Train, RejectsUnrepresentableDocument) {
  Document d = gridquad::testing::worked_example();
  auto q = d.quadruples[0];
  q.sentiment = Sentiment::neg;
  d.quadruples.push_back(q);
  EXPECT_THROW(train({d}, {}, tiny_config()), EncodingError);
}

TEST(Train, AblationsRun) {
  const auto docs = tiny_corpus(4, 6);
  for (int k = 0; k < 4; ++k) {
    TrainConfig c = tiny_config();
    c.epochs = 1;
    if (k == 0) c.use_skem = false;
    if (k == 1) c.use_pos = false;
    if (k == 2) c.use_dep = false;
    if (k == 3) c.randomize_syntax = true;
    const auto r = train(docs, docs, c);
    EXPECT_EQ(r.log.epochs.size(), 1u);
    EXPECT_TRUE(std::isfinite(r.log.epochs[0].loss));
  }
}

TEST(Predict, UniformModelPredictsNothing) {
  Model m;
  m.config = tiny_config();
  m.tokens = build_vocabulary({gridquad::testing::worked_example()}, 0, false);
  m.pos_tags = build_vocabulary({gridquad::testing::worked_example()}, 0, true);
  m.params = zero_params<double>(model_dims(m.config, m.tokens, m.pos_tags));
  const auto r = predict(gridquad::testing::worked_example(), m);
  EXPECT_TRUE(r.quadruples.empty());
}

TEST(Predict, Deterministic) {
  const auto docs = tiny_corpus(4, 7);
  const auto r = train(docs, {}, tiny_config());
  for (const auto& d : docs) EXPECT_EQ(predict(d, r.model).quadruples, predict(d, r.model).quadruples);
}

TEST(Input, SyntaxToggles) {
  Model m;
  m.config = tiny_config();
  const Document d = gridquad::testing::worked_example();
  m.tokens = build_vocabulary({d}, 0, false);
  m.pos_tags = build_vocabulary({d}, 0, true);
  const auto with_dep = make_input(d, m);
  EXPECT_EQ(with_dep.adjacency.sum(), 6 + 2 * 5);
  m.config.use_dep = false;
  EXPECT_TRUE(make_input(d, m).adjacency.isIdentity(0));
  m.config.use_dep = true;
  m.config.randomize_syntax = true;
  const auto random = make_input(d, m);
  EXPECT_EQ(random.adjacency.sum(), with_dep.adjacency.sum());
  EXPECT_EQ(random.adjacency, make_input(d, m).adjacency);
}

TEST(Vocabulary, UnknownIsZero) {
  const auto v = build_vocabulary({gridquad::testing::worked_example()}, 3, false);
  EXPECT_EQ(v.size(), 3);
  EXPECT_EQ(v.id("never-seen"), Vocabulary::kUnknown);
}

TEST(Throughput, PositiveRate) {
  const auto docs = tiny_corpus(3, 8);
  TrainConfig c = tiny_config();
  c.epochs = 0;
  const auto r = train(docs, {}, c);
  EXPECT_GT(throughput(docs, r.model, ThroughputMode::inference), 0.0);
  EXPECT_GT(throughput(docs, r.model, ThroughputMode::train), 0.0);
}
