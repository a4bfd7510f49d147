#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "gridquad/error.hpp"
#include "gridquad/grid.hpp"
#include "gridquad/model.hpp"

namespace gridquad {

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

// Central differences on every entry of `x` against `analytic`; x is restored. The loss may be
// evaluated at a wider precision than the analytic gradient so the differences are not
// dominated by round-off where gradients are small.
template <typename Scalar, typename Analytic, typename LossFn>
double grad_check(LossFn&& loss, Mat<Scalar>& x, const Mat<Analytic>& analytic, double step = 1e-5) {
  if (analytic.rows() != x.rows() || analytic.cols() != x.cols()) throw ContractError("grad_check: shape mismatch");
  double worst = 0;
  const auto h = static_cast<Scalar>(step);
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar keep = x(r, c);
      x(r, c) = keep + h;
      const long double up = loss();
      x(r, c) = keep - h;
      const long double down = loss();
      x(r, c) = keep;
      const auto numeric = static_cast<double>((up - down) / (2.0L * static_cast<long double>(h)));
      worst = std::max(worst, relative_error(static_cast<double>(analytic(r, c)), numeric));
    }
  return worst;
}

template <typename To, typename From>
ModelInput<To> cast_input(const ModelInput<From>& in) {
  return {in.tokens, in.pos, in.adjacency.template cast<To>()};
}

struct GradCheckResult {
  std::string tensor;
  double max_relative_error = 0;
  long entries = 0;
};

// Analytic double-precision gradients of the full grid loss (dropout off) for every tensor
// whose key passes `select`, each compared with central differences taken in long double.
inline std::vector<GradCheckResult> check_model_gradients(const ModelParams<double>& params,
                                                          const ModelInput<double>& in, const SyntaxOptions& opt,
                                                          const EntityGrid& ge, const RelationGrid& gr,
                                                          const std::function<bool(const std::string&)>& select,
                                                          double step = 1e-5) {
  ModelParams<double> grads = zeros_like(params);
  backward(forward(params, in, opt), params, ge, gr, grads);
  std::string bad;
  if (!all_finite(grads, &bad)) throw NumericError("non-finite gradient in tensor '" + bad + "'");

  std::vector<const Mat<double>*> analytic;
  grads.for_each([&](const std::string&, const Mat<double>& g) { analytic.push_back(&g); });

  auto wide = cast_params<long double>(params);
  const auto wide_in = cast_input<long double>(in);
  std::vector<GradCheckResult> out;
  std::size_t k = 0;
  wide.for_each([&](const std::string& name, Mat<long double>& w) {
    const Mat<double>& g = *analytic[k++];
    if (!select(name)) return;
    auto loss = [&] { return loss_of(wide, wide_in, opt, ge, gr).total(); };
    out.push_back({name, grad_check(loss, w, g, step), static_cast<long>(w.size())});
  });
  return out;
}

// d(loss)/d(entity scores) and d(loss)/d(bridged relation scores) vs central differences
// through softmax + clamped log.
inline double check_loss_gradient(const std::array<Mat<double>, 4>& entity_scores,
                                  const std::array<Mat<double>, 4>& relation_scores, const EntityGrid& ge,
                                  const RelationGrid& gr, double step = 1e-5) {
  std::array<Mat<long double>, 4> es, rs;
  for (int l = 0; l < 4; ++l) {
    es[l] = entity_scores[l].cast<long double>();
    rs[l] = relation_scores[l].cast<long double>();
  }
  auto total = [&] { return grid_loss(softmax4(es), softmax4(rs), ge, gr).total(); };
  const auto de = grid_loss_score_gradient(softmax4(entity_scores), ge);
  const auto dr = grid_loss_score_gradient(softmax4(relation_scores), gr);
  double worst = 0;
  for (int l = 0; l < 4; ++l) {
    worst = std::max(worst, grad_check(total, es[l], de[l], step));
    worst = std::max(worst, grad_check(total, rs[l], dr[l], step));
  }
  return worst;
}

// A four-token document with one full quadruple and a small model (all widths <= 8),
// used by the gradient suite.
struct GradcheckFixture {
  ModelParams<double> params;
  ModelInput<double> input;
  EntityGrid entity;
  RelationGrid relation;
};

inline GradcheckFixture make_gradcheck_fixture(std::uint64_t seed, int n = 4) {
  if (n < 3) throw ContractError("gradcheck fixture needs at least 3 tokens");
  GradcheckFixture f;
  const ModelDims dims{6, 4, 6, 3, 8, 7, 5};
  f.params = init_params<double>(dims, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  f.params.for_each([&](const std::string& name, Mat<double>& m) {
    if (is_bias(name))
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  });
  for (int i = 0; i < n; ++i) {
    f.input.tokens.push_back(1 + i % (dims.vocab - 1));
    f.input.pos.push_back(1 + i % (dims.pos_vocab - 1));
  }
  std::vector<std::pair<int, int>> chain;
  for (int i = 0; i + 1 < n; ++i) chain.emplace_back(i, i + 1);
  f.input.adjacency = adjacency_matrix<double>(n, chain);

  Document doc;
  doc.tokens.assign(static_cast<std::size_t>(n), "x");
  doc.quadruples.push_back({{0, 1}, Span{1, 2}, {n - 1, n}, Sentiment::pos});
  std::tie(f.entity, f.relation) = detail::encode_lenient(doc, nullptr);
  return f;
}

}  // namespace gridquad
