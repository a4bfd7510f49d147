#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"

using namespace gridquad;

namespace {

constexpr double kTight = 1e-12;

ModelParams<double> random_params(const ModelDims& d, std::uint64_t seed) {
  auto p = init_params<double>(d, seed);
  std::mt19937_64 rng(seed * 7 + 1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  p.for_each([&](const std::string& name, Mat<double>& m) {
    if (is_bias(name))
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  });
  return p;
}

Mat<double> random_mat(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Mat<double> m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

std::vector<double> mlp_row(const Mlp<double>& m, const Mat<double>& x, int row) {
  std::vector<double> out(static_cast<std::size_t>(m.weight.cols()));
  for (int o = 0; o < m.weight.cols(); ++o) {
    double s = m.bias(0, o);
    for (int k = 0; k < x.cols(); ++k) s += x(row, k) * m.weight(k, o);
    out[o] = std::max(0.0, s);
  }
  return out;
}

double max_abs_diff(const Mat<double>& a, const Mat<double>& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Encoder, EmptyDocument) {
  const auto p = init_params<double>({5, 3, 4, 2, 3, 3, 3}, 1);
  EXPECT_EQ(encode_text<double>({}, p).rows(), 0);
}

TEST(Encoder, LookupIdentity) {
  auto p = zero_params<double>({6, 3, 6, 2, 3, 3, 3});
  p.token_embedding = Mat<double>::Identity(6, 6);
  const Mat<double> h = encode_text<double>({3, 3}, p);
  EXPECT_EQ(h.row(0), p.token_embedding.row(3));
  EXPECT_EQ(h.row(0), h.row(1));
}

TEST(Skem, SelfLoopIdentity) {
  auto p = zero_params<double>({4, 2, 3, 2, 5, 3, 3});
  p.gcn.topLeftCorner(3, 3).setIdentity();
  Mat<double> hx(1, 3);
  hx << 0.5, 2.0, 0.0;
  const Mat<double> hs = skem_forward(hx, {0}, adjacency_matrix<double>(1, {}), p, false);
  EXPECT_EQ(hs.cols(), 5);
  EXPECT_EQ(hs.leftCols(3), hx);
  EXPECT_EQ(hs(0, 3), 0.0);
}

TEST(Skem, ZeroWeightsGiveZero) {
  auto p = zero_params<double>({4, 2, 3, 2, 5, 3, 3});
  p.pos_embedding.setOnes();
  const Mat<double> hs = skem_forward(random_mat(3, 3, 2), {1, 1, 0}, adjacency_matrix<double>(3, {{0, 1}}), p);
  EXPECT_TRUE(hs.isZero(0));
}

TEST(Skem, MatchesDenseLoopOracle) {
  const ModelDims d{4, 3, 3, 2, 4, 3, 3};
  const auto p = random_params(d, 5);
  const Mat<double> hx = random_mat(2, 3, 9);
  const std::vector<int> pos{1, 2};
  for (bool normalize : {false, true}) {
    const Mat<double> a = adjacency_matrix<double>(2, {{0, 1}}, normalize);
    const Mat<double> hs = skem_forward(hx, pos, a, p);
    double deg = normalize ? 0.5 : 1.0;  // both nodes have degree 2 including the self-loop
    for (int i = 0; i < 2; ++i)
      for (int o = 0; o < d.h_s; ++o) {
        double s = 0;
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < d.h_x + d.h_p; ++k) {
            double v = k < d.h_x ? hx(j, k) : p.pos_embedding(pos[j], k - d.h_x);
            s += deg * v * p.gcn(k, o);
          }
        EXPECT_NEAR(hs(i, o), std::max(0.0, s), kTight);
      }
  }
}

TEST(Skem, DimensionMismatchIsContractError) {
  const auto p = init_params<double>({4, 3, 3, 2, 4, 3, 3}, 1);
  EXPECT_THROW(skem_forward(random_mat(2, 5, 1), {0, 0}, adjacency_matrix<double>(2, {}), p), ContractError);
}

TEST(Entity, ZeroBilinearIsUniform) {
  auto p = init_params<double>({4, 3, 3, 2, 4, 3, 3}, 3);
  for (auto& l : p.entity) l.bilinear.setZero();
  const auto e = entity_scores(random_mat(3, 4, 4), p);
  for (int l = 0; l < 4; ++l) EXPECT_TRUE(e.probs[l].isConstant(0.25, 1e-15));
}

TEST(Entity, MatchesBilinearFormOracle) {
  const ModelDims d{4, 3, 3, 2, 3, 2, 2};
  const auto p = random_params(d, 8);
  const Mat<double> hs = random_mat(2, 3, 10);
  const auto e = entity_scores(hs, p);
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const auto u = mlp_row(p.entity[l].left, e.hidden, i);
        const auto v = mlp_row(p.entity[l].right, e.hidden, j);
        double s = 0;
        for (int a = 0; a < d.h_e; ++a)
          for (int b = 0; b < d.h_e; ++b) s += u[a] * p.entity[l].bilinear(a, b) * v[b];
        EXPECT_NEAR(e.scores()[l](i, j), s, kTight);
      }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double z = 0;
      for (int l = 0; l < 4; ++l) z += e.probs[l](i, j);
      EXPECT_NEAR(z, 1.0, kTight);
    }
}

TEST(Relation, ZeroPairScoresStayZero) {
  auto p = random_params({4, 3, 3, 2, 4, 3, 3}, 4);
  for (auto& l : p.relation_pair) l.bilinear.setZero();
  const auto r = relation_scores(random_mat(3, 4, 6), p);
  for (int q = 0; q < 4; ++q) {
    EXPECT_TRUE(r.bridged[q].isZero(0));
    EXPECT_TRUE(r.probs[q].isConstant(0.25, 1e-15));
  }
}

TEST(Relation, SingleTokenClosedForm) {
  const auto p = random_params({4, 3, 3, 2, 4, 3, 3}, 12);
  const auto r = relation_scores(random_mat(1, 4, 13), p);
  for (int q = 0; q < 4; ++q) {
    const double c = r.pair_scores()[q](0, 0);
    const double w = r.triple_weights[q][0](0, 0);
    EXPECT_NEAR(r.bridged[q](0, 0), c * (1 + 2 * w), kTight);
  }
}

TEST(Relation, MatchesTripleLoopOracle) {
  const ModelDims d{4, 3, 3, 2, 4, 3, 2};
  const int n = 3, h = d.h_r;
  const auto p = random_params(d, 21);
  const Mat<double> hs = random_mat(n, d.h_s, 22);
  const auto r = relation_scores(hs, p);

  // triple[q][i][k][j]
  std::vector<double> raw(4 * n * n * n);
  auto at = [&](int q, int i, int k, int j) -> double& { return raw[((q * n + i) * n + k) * n + j]; };
  for (int q = 0; q < 4; ++q) {
    const auto& t = p.relation_triple[q];
    for (int i = 0; i < n; ++i) {
      auto m3 = mlp_row(t.first, r.hidden, i);
      m3.push_back(1.0);
      for (int k = 0; k < n; ++k) {
        const auto m4 = mlp_row(t.middle, r.hidden, k);
        for (int j = 0; j < n; ++j) {
          const auto m5 = mlp_row(t.last, r.hidden, j);
          double s = 0;
          for (int a = 0; a < h; ++a)
            for (int b = 0; b < h; ++b)
              for (int c = 0; c <= h; ++c) s += m4[a] * t.tensor(a + b * h, c) * m3[c] * m5[b];
          at(q, i, k, j) = s;
        }
      }
    }
  }
  for (int q = 0; q < 4; ++q)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double y = r.pair_scores()[q](i, j);
        for (int k = 0; k < n; ++k) {
          double z = 0;
          for (int qq = 0; qq < 4; ++qq) z += std::exp(at(qq, i, k, j));
          const double w = std::exp(at(q, i, k, j)) / z;
          EXPECT_NEAR(r.triple_weights[q][i](k, j), w, kTight);
          y += (r.pair_scores()[q](i, k) + r.pair_scores()[q](k, j)) * w;
        }
        EXPECT_NEAR(r.bridged[q](i, j), y, kTight);
      }
}

TEST(Softmax, ShiftInvariant) {
  std::array<Mat<double>, 4> s;
  for (int l = 0; l < 4; ++l) s[l] = random_mat(3, 3, 30 + l) * 5;
  auto shifted = s;
  for (auto& m : shifted) m.array() += 123.25;
  const auto a = softmax4(s), b = softmax4(shifted);
  for (int l = 0; l < 4; ++l) EXPECT_LT(max_abs_diff(a[l], b[l]), 1e-14);
}

TEST(Loss, UniformIsTwoLnFour) {
  std::array<Mat<double>, 4> u;
  for (auto& m : u) m = Mat<double>::Constant(3, 3, 0.25);
  const auto [eg, rg] = encode_grids(gridquad::testing::blank_document(3));
  EXPECT_NEAR(static_cast<double>(grid_loss(u, u, eg, rg).total()), 2 * std::log(4.0), kTight);
}

TEST(Loss, PerfectPredictionIsZero) {
  const auto doc = gridquad::testing::worked_example();
  const auto [eg, rg] = encode_grids(doc);
  std::array<Mat<double>, 4> pe, pr;
  for (int l = 0; l < 4; ++l) {
    pe[l] = Mat<double>::Zero(6, 6);
    pr[l] = Mat<double>::Zero(6, 6);
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      pe[static_cast<int>(eg(i, j))](i, j) = 1;
      pr[static_cast<int>(rg(i, j))](i, j) = 1;
    }
  EXPECT_EQ(grid_loss(pe, pr, eg, rg).total(), 0.0L);
}

TEST(Loss, HandSummedOracle) {
  EntityGrid eg(2);
  RelationGrid rg(2);
  eg(0, 0) = EntityLabel::tgt;
  eg(1, 1) = EntityLabel::opin;
  rg(0, 1) = RelationLabel::neg;
  std::array<Mat<double>, 4> pe, pr;
  pe[0] = (Mat<double>(2, 2) << 0.7, 0.1, 0.2, 0.1).finished();
  pe[1] = (Mat<double>(2, 2) << 0.1, 0.1, 0.2, 0.1).finished();
  pe[2] = (Mat<double>(2, 2) << 0.1, 0.1, 0.2, 0.6).finished();
  pe[3] = (Mat<double>(2, 2) << 0.1, 0.7, 0.4, 0.2).finished();
  pr[0] = (Mat<double>(2, 2) << 0.1, 0.2, 0.0, 0.3).finished();
  pr[1] = (Mat<double>(2, 2) << 0.1, 0.2, 0.0, 0.3).finished();
  pr[2] = (Mat<double>(2, 2) << 0.1, 0.5, 0.0, 0.1).finished();
  pr[3] = (Mat<double>(2, 2) << 0.7, 0.1, 1.0, 0.3).finished();
  const double le = -(std::log(0.7) + std::log(0.7) + std::log(0.4) + std::log(0.6)) / 4;
  const double lr = -(std::log(0.7) + std::log(0.5) + std::log(1.0) + std::log(0.3)) / 4;
  const auto v = grid_loss(pe, pr, eg, rg);
  EXPECT_NEAR(static_cast<double>(v.entity), le, kTight);
  EXPECT_NEAR(static_cast<double>(v.relation), lr, kTight);
}

TEST(Loss, ZeroProbabilityIsClamped) {
  EntityGrid eg(1);
  RelationGrid rg(1);
  std::array<Mat<double>, 4> p;
  for (int l = 0; l < 4; ++l) p[l] = Mat<double>::Constant(1, 1, l == 0 ? 1.0 : 0.0);
  const auto v = grid_loss(p, p, eg, rg);
  EXPECT_NEAR(static_cast<double>(v.entity), -std::log(1e-12), 1e-9);
  EXPECT_TRUE(std::isfinite(static_cast<double>(v.total())));
}

// Relabelling tokens with a permutation permutes every grid of scores the same way.
TEST(Model, PermutationEquivariance) {
  const ModelDims d{6, 4, 4, 3, 5, 4, 3};
  const auto p = random_params(d, 40);
  ModelInput<double> in{{1, 2, 3, 4}, {1, 2, 3, 1}, adjacency_matrix<double>(4, {{0, 1}, {1, 2}, {2, 3}})};
  const std::vector<int> perm{2, 0, 3, 1};  // new position i holds old token perm[i]
  ModelInput<double> pin;
  Mat<double> pm = Mat<double>::Zero(4, 4);
  for (int i = 0; i < 4; ++i) {
    pin.tokens.push_back(in.tokens[perm[i]]);
    pin.pos.push_back(in.pos[perm[i]]);
    pm(i, perm[i]) = 1;
  }
  pin.adjacency = pm * in.adjacency * pm.transpose();
  const auto a = forward(p, in, SyntaxOptions{});
  const auto b = forward(p, pin, SyntaxOptions{});
  for (int l = 0; l < 4; ++l) {
    EXPECT_LT(max_abs_diff(b.entity.probs[l], pm * a.entity.probs[l] * pm.transpose()), 1e-12);
    EXPECT_LT(max_abs_diff(b.relation.probs[l], pm * a.relation.probs[l] * pm.transpose()), 1e-12);
  }
}

TEST(Model, ForwardIsDeterministic) {
  const auto f = make_gradcheck_fixture(3);
  const auto a = forward(f.params, f.input, SyntaxOptions{});
  const auto b = forward(f.params, f.input, SyntaxOptions{});
  for (int l = 0; l < 4; ++l) EXPECT_EQ(a.relation.probs[l], b.relation.probs[l]);
}

TEST(Params, SameSeedSameParams) {
  const ModelDims d{5, 3, 4, 2, 4, 3, 3};
  const auto a = init_params<double>(d, 9), b = init_params<double>(d, 9);
  std::vector<Mat<double>> va, vb;
  a.for_each([&](const std::string&, const Mat<double>& m) { va.push_back(m); });
  b.for_each([&](const std::string&, const Mat<double>& m) { vb.push_back(m); });
  EXPECT_EQ(va, vb);
}

TEST(Params, ZeroDimensionRejected) {
  EXPECT_THROW(init_params<double>({5, 3, 0, 2, 4, 3, 3}, 1), ContractError);
}

TEST(Params, BiasesStartAtZero) {
  const auto p = init_params<double>({5, 3, 4, 2, 4, 3, 3}, 2);
  p.for_each([](const std::string& name, const Mat<double>& m) {
    if (is_bias(name)) EXPECT_TRUE(m.isZero(0)) << name;
  });
}

TEST(Predict, TiesResolveToNone) {
  std::array<Mat<double>, 4> u;
  for (auto& m : u) m = Mat<double>::Constant(2, 2, 0.25);
  const auto g = argmax_grid<double, EntityLabel>(u);
  EXPECT_TRUE(g.filled().empty());
}
