#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridquad/corpus.hpp"
#include "gridquad/error.hpp"
#include "gridquad/grid.hpp"
#include "gridquad/params.hpp"

namespace gridquad {

struct SyntaxOptions {
  bool use_skem = true;
  bool use_pos = true;
  bool use_dep = true;
  bool normalize_adjacency = false;
};

inline constexpr double kLogClamp = 1e-12;

// Ids and adjacency for one document.
template <typename Scalar = double>
struct ModelInput {
  std::vector<int> tokens;
  std::vector<int> pos;
  Mat<Scalar> adjacency;
  int size() const { return static_cast<int>(tokens.size()); }
};

// Symmetric 0/1 adjacency with self-loops; optional D^-1/2 A D^-1/2.
template <typename Scalar = double>
Mat<Scalar> adjacency_matrix(int n, const std::vector<std::pair<int, int>>& edges, bool normalize = false) {
  Mat<Scalar> a = Mat<Scalar>::Identity(n, n);
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) throw ContractError("dependency edge out of range");
    a(i, j) = 1;
    a(j, i) = 1;
  }
  if (normalize && n > 0) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv = a.rowwise().sum().cwiseSqrt().cwiseInverse();
    a = inv.asDiagonal() * a * inv.asDiagonal();
  }
  return a;
}

// ---------------------------------------------------------------------------
// Small pieces

template <typename Scalar>
Mat<Scalar> mlp_forward(const Mlp<Scalar>& m, const Mat<Scalar>& x) {
  Mat<Scalar> z = x * m.weight;
  z.rowwise() += m.bias.row(0);
  return z.cwiseMax(Scalar(0));
}

// Accumulates weight/bias gradients into g and the input gradient into dx.
template <typename Scalar>
void mlp_backward(const Mlp<Scalar>& m, const Mat<Scalar>& x, const Mat<Scalar>& out, const Mat<Scalar>& dout,
                  Mlp<Scalar>& g, Mat<Scalar>& dx) {
  Mat<Scalar> dz = (out.array() > Scalar(0)).select(dout, Scalar(0));
  g.weight.noalias() += x.transpose() * dz;
  g.bias += dz.colwise().sum();
  dx.noalias() += dz * m.weight.transpose();
}

template <typename Scalar>
std::array<Mat<Scalar>, 4> softmax4(const std::array<Mat<Scalar>, 4>& s) {
  Mat<Scalar> mx = s[0].cwiseMax(s[1]).cwiseMax(s[2]).cwiseMax(s[3]);
  std::array<Mat<Scalar>, 4> e;
  for (int l = 0; l < 4; ++l) e[l] = (s[l] - mx).array().exp().matrix();
  Mat<Scalar> z = e[0] + e[1] + e[2] + e[3];
  for (int l = 0; l < 4; ++l) e[l] = e[l].cwiseQuotient(z);
  return e;
}

// ---------------------------------------------------------------------------
// Text encoder: embedding lookup, unknown ids fall back to row 0.

template <typename Scalar>
Mat<Scalar> encode_text(const std::vector<int>& token_ids, const ModelParams<Scalar>& p) {
  const int n = static_cast<int>(token_ids.size());
  Mat<Scalar> h(n, p.dims.h_x);
  for (int i = 0; i < n; ++i) {
    int id = token_ids[i];
    if (id < 0 || id >= p.dims.vocab) id = Vocabulary::kUnknown;
    h.row(i) = p.token_embedding.row(id);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Syntax knowledge module: POS concat + one graph convolution.

template <typename Scalar>
struct SkemCache {
  Mat<Scalar> concat;     // H_xp
  Mat<Scalar> propagated; // A * H_xp
  Mat<Scalar> output;     // H_s before dropout
};

template <typename Scalar>
Mat<Scalar> skem_forward(const Mat<Scalar>& hx, const std::vector<int>& pos_ids, const Mat<Scalar>& adjacency,
                         const ModelParams<Scalar>& p, bool use_pos = true, SkemCache<Scalar>* cache = nullptr) {
  const int n = static_cast<int>(hx.rows());
  const auto& d = p.dims;
  if (hx.cols() != d.h_x || static_cast<int>(pos_ids.size()) != n || adjacency.rows() != n || adjacency.cols() != n)
    throw ContractError("skem_forward: dimension mismatch");
  Mat<Scalar> concat(n, d.h_x + d.h_p);
  concat.leftCols(d.h_x) = hx;
  concat.rightCols(d.h_p).setZero();
  if (use_pos) {
    for (int i = 0; i < n; ++i) {
      int id = pos_ids[i];
      if (id < 0 || id >= d.pos_vocab) id = Vocabulary::kUnknown;
      concat.row(i).tail(d.h_p) = p.pos_embedding.row(id);
    }
  }
  Mat<Scalar> propagated = adjacency * concat;
  Mat<Scalar> out = (propagated * p.gcn).cwiseMax(Scalar(0));
  if (cache) {
    cache->concat = std::move(concat);
    cache->propagated = std::move(propagated);
    cache->output = out;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Biaffine entity scorer.

template <typename Scalar>
struct BiaffineCache {
  std::array<Mat<Scalar>, 4> left, right, scores;
};

template <typename Scalar>
BiaffineCache<Scalar> biaffine_forward(const Mat<Scalar>& h, const std::array<BiaffineLabel<Scalar>, 4>& labels) {
  BiaffineCache<Scalar> c;
  for (int l = 0; l < 4; ++l) {
    c.left[l] = mlp_forward(labels[l].left, h);
    c.right[l] = mlp_forward(labels[l].right, h);
    c.scores[l] = c.left[l] * labels[l].bilinear * c.right[l].transpose();
  }
  return c;
}

template <typename Scalar>
void biaffine_backward(const Mat<Scalar>& h, const std::array<BiaffineLabel<Scalar>, 4>& labels,
                       const BiaffineCache<Scalar>& c, const std::array<Mat<Scalar>, 4>& dscores,
                       std::array<BiaffineLabel<Scalar>, 4>& grads, Mat<Scalar>& dh) {
  for (int l = 0; l < 4; ++l) {
    const Mat<Scalar> rw = c.right[l] * labels[l].bilinear.transpose();  // n x h
    const Mat<Scalar> lw = c.left[l] * labels[l].bilinear;               // n x h
    Mat<Scalar> dleft = dscores[l] * rw;
    Mat<Scalar> dright = dscores[l].transpose() * lw;
    grads[l].bilinear.noalias() += c.left[l].transpose() * dscores[l] * c.right[l];
    mlp_backward(labels[l].left, h, c.left[l], dleft, grads[l].left, dh);
    mlp_backward(labels[l].right, h, c.right[l], dright, grads[l].right, dh);
  }
}

template <typename Scalar>
struct EntityScores {
  Mat<Scalar> hidden;  // H_e
  BiaffineCache<Scalar> biaffine;
  std::array<Mat<Scalar>, 4> probs;
  const std::array<Mat<Scalar>, 4>& scores() const { return biaffine.scores; }
};

template <typename Scalar>
EntityScores<Scalar> entity_scores(const Mat<Scalar>& hs, const ModelParams<Scalar>& p) {
  if (hs.cols() != p.dims.h_s) throw ContractError("entity_scores: H_s width mismatch");
  EntityScores<Scalar> e;
  e.hidden = hs * p.entity_proj;
  e.hidden.rowwise() += p.entity_bias.row(0);
  e.biaffine = biaffine_forward(e.hidden, p.entity);
  e.probs = softmax4(e.biaffine.scores);
  return e;
}

// ---------------------------------------------------------------------------
// Relation scorer: biaffine pair scores bridged through triaffine triple weights.

template <typename Scalar>
struct RelationScores {
  Mat<Scalar> hidden;  // H_r
  BiaffineCache<Scalar> pair;
  std::array<Mat<Scalar>, 4> first, middle, last;  // MLP3/4/5 outputs
  std::array<Mat<Scalar>, 4> slices;               // (h*h) x n, column i = vec of the h x h form for token i
  // triple_weights[q][i](k, j): label-normalised weight of bridge token k for cell (i, j).
  std::array<std::vector<Mat<Scalar>>, 4> triple_weights;
  std::array<Mat<Scalar>, 4> bridged;
  std::array<Mat<Scalar>, 4> probs;
  const std::array<Mat<Scalar>, 4>& pair_scores() const { return pair.scores; }
};

template <typename Scalar>
Mat<Scalar> augment_ones(const Mat<Scalar>& x) {
  Mat<Scalar> a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

template <typename Scalar>
RelationScores<Scalar> relation_scores(const Mat<Scalar>& hs, const ModelParams<Scalar>& p) {
  if (hs.cols() != p.dims.h_s) throw ContractError("relation_scores: H_s width mismatch");
  const int n = static_cast<int>(hs.rows());
  const int h = p.dims.h_r;
  RelationScores<Scalar> r;
  r.hidden = hs * p.relation_proj;
  r.hidden.rowwise() += p.relation_bias.row(0);
  r.pair = biaffine_forward(r.hidden, p.relation_pair);

  for (int q = 0; q < 4; ++q) {
    const auto& t = p.relation_triple[q];
    r.first[q] = mlp_forward(t.first, r.hidden);
    r.middle[q] = mlp_forward(t.middle, r.hidden);
    r.last[q] = mlp_forward(t.last, r.hidden);
    r.slices[q] = t.tensor * augment_ones(r.first[q]).transpose();
    r.triple_weights[q].resize(static_cast<std::size_t>(n));
  }

  std::array<Mat<Scalar>, 4> raw;
  for (int i = 0; i < n; ++i) {
    for (int q = 0; q < 4; ++q) {
      Eigen::Map<const Mat<Scalar>> form(r.slices[q].col(i).data(), h, h);
      raw[q] = (r.middle[q] * form) * r.last[q].transpose();
    }
    auto w = softmax4(raw);
    for (int q = 0; q < 4; ++q) r.triple_weights[q][i] = std::move(w[q]);
  }

  for (int q = 0; q < 4; ++q) {
    const Mat<Scalar>& yhat = r.pair.scores[q];
    Mat<Scalar> y = yhat;
    for (int i = 0; i < n; ++i) {
      const Mat<Scalar>& w = r.triple_weights[q][i];
      // sum_k yhat(i,k) w(k,j)  +  sum_k yhat(k,j) w(k,j)
      y.row(i) += yhat.row(i) * w + yhat.cwiseProduct(w).colwise().sum();
    }
    r.bridged[q] = std::move(y);
  }
  r.probs = softmax4(r.bridged);
  return r;
}

// ---------------------------------------------------------------------------
// Joint cross-entropy over both grids.

// Accumulated in long double so extended-precision forward passes keep their digits.
struct LossValue {
  long double entity = 0;
  long double relation = 0;
  long double total() const { return entity + relation; }
};

template <typename Scalar, typename Label>
long double grid_cross_entropy(const std::array<Mat<Scalar>, 4>& probs, const Grid<Label>& gold) {
  const int n = gold.size();
  if (probs[0].rows() != n || probs[0].cols() != n) throw ContractError("grid_loss: size mismatch");
  if (n == 0) return 0.0L;
  long double sum = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const long double pg = probs[static_cast<int>(gold(i, j))](i, j);
      sum -= std::log(std::max(pg, static_cast<long double>(kLogClamp)));
    }
  return sum / (static_cast<long double>(n) * n);
}

template <typename Scalar>
LossValue grid_loss(const std::array<Mat<Scalar>, 4>& entity_probs, const std::array<Mat<Scalar>, 4>& relation_probs,
                    const EntityGrid& gold_entity, const RelationGrid& gold_relation) {
  if (gold_entity.size() != gold_relation.size()) throw ContractError("grid_loss: grids differ in size");
  return {grid_cross_entropy(entity_probs, gold_entity), grid_cross_entropy(relation_probs, gold_relation)};
}

// d(loss)/d(scores) for softmax + clamped cross-entropy: (p - onehot) / n^2, zero where clamped.
template <typename Scalar, typename Label>
std::array<Mat<Scalar>, 4> grid_loss_score_gradient(const std::array<Mat<Scalar>, 4>& probs, const Grid<Label>& gold) {
  const int n = gold.size();
  std::array<Mat<Scalar>, 4> d;
  if (n == 0) {
    for (auto& m : d) m.resize(0, 0);
    return d;
  }
  const Scalar scale = Scalar(1) / (static_cast<Scalar>(n) * n);
  for (int l = 0; l < 4; ++l) d[l] = probs[l] * scale;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int g = static_cast<int>(gold(i, j));
      if (static_cast<double>(probs[g](i, j)) < kLogClamp) {
        for (int l = 0; l < 4; ++l) d[l](i, j) = 0;
      } else {
        d[g](i, j) -= scale;
      }
    }
  return d;
}

// ---------------------------------------------------------------------------
// Whole forward pass with the activations backward() needs.

struct DropoutSpec {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return rng != nullptr && rate > 0.0; }
};

template <typename Scalar = double>
struct Tape {
  const ModelInput<Scalar>* input = nullptr;
  SyntaxOptions options;
  Mat<Scalar> hx;       // after dropout
  Mat<Scalar> hx_mask;  // empty when no dropout
  SkemCache<Scalar> skem;
  Mat<Scalar> hs;  // after dropout
  Mat<Scalar> hs_mask;
  EntityScores<Scalar> entity;
  RelationScores<Scalar> relation;
};

namespace detail {
template <typename Scalar>
Mat<Scalar> dropout_mask(Eigen::Index r, Eigen::Index c, const DropoutSpec& d) {
  Mat<Scalar> m(r, c);
  std::bernoulli_distribution keep(1.0 - d.rate);
  const Scalar scale = Scalar(1.0 / (1.0 - d.rate));
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = keep(*d.rng) ? scale : Scalar(0);
  return m;
}
}  // namespace detail

template <typename Scalar>
Tape<Scalar> forward(const ModelParams<Scalar>& p, const ModelInput<Scalar>& in, const SyntaxOptions& opt,
                     DropoutSpec dropout = {}) {
  Tape<Scalar> t;
  t.input = &in;
  t.options = opt;
  t.hx = encode_text(in.tokens, p);
  if (dropout.active()) {
    t.hx_mask = detail::dropout_mask<Scalar>(t.hx.rows(), t.hx.cols(), dropout);
    t.hx = t.hx.cwiseProduct(t.hx_mask);
  }
  Mat<Scalar> hs;
  if (opt.use_skem) {
    hs = skem_forward(t.hx, in.pos, in.adjacency, p, opt.use_pos, &t.skem);
  } else {
    hs = t.hx * p.skip;
  }
  if (dropout.active()) {
    t.hs_mask = detail::dropout_mask<Scalar>(hs.rows(), hs.cols(), dropout);
    hs = hs.cwiseProduct(t.hs_mask);
  }
  t.hs = std::move(hs);
  t.entity = entity_scores(t.hs, p);
  t.relation = relation_scores(t.hs, p);
  return t;
}

// Reverse pass. Adds d(loss)/d(param) into `grads` and returns the loss.
template <typename Scalar>
LossValue backward(const Tape<Scalar>& t, const ModelParams<Scalar>& p, const EntityGrid& gold_entity,
                   const RelationGrid& gold_relation, ModelParams<Scalar>& grads) {
  const ModelInput<Scalar>& in = *t.input;
  const int n = in.size();
  const int h = p.dims.h_r;
  LossValue loss = grid_loss(t.entity.probs, t.relation.probs, gold_entity, gold_relation);
  if (n == 0) return loss;

  Mat<Scalar> dhs = Mat<Scalar>::Zero(n, p.dims.h_s);

  // Entity branch.
  {
    auto dscores = grid_loss_score_gradient(t.entity.probs, gold_entity);
    Mat<Scalar> dhe = Mat<Scalar>::Zero(n, p.dims.h_e);
    biaffine_backward(t.entity.hidden, p.entity, t.entity.biaffine, dscores, grads.entity, dhe);
    grads.entity_proj.noalias() += t.hs.transpose() * dhe;
    grads.entity_bias += dhe.colwise().sum();
    dhs.noalias() += dhe * p.entity_proj.transpose();
  }

  // Relation branch.
  {
    const auto& r = t.relation;
    auto dbridged = grid_loss_score_gradient(r.probs, gold_relation);
    std::array<Mat<Scalar>, 4> dpair = dbridged;
    std::array<Mat<Scalar>, 4> dfirst, dmiddle, dlast, dslices;
    for (int q = 0; q < 4; ++q) {
      dfirst[q] = Mat<Scalar>::Zero(n, h);
      dmiddle[q] = Mat<Scalar>::Zero(n, h);
      dlast[q] = Mat<Scalar>::Zero(n, h);
      dslices[q] = Mat<Scalar>::Zero(h * h, n);
    }
    std::array<Mat<Scalar>, 4> dw;
    for (int i = 0; i < n; ++i) {
      for (int q = 0; q < 4; ++q) {
        const Mat<Scalar>& yhat = r.pair.scores[q];
        const Mat<Scalar>& w = r.triple_weights[q][i];
        const RowVec<Scalar> g = dbridged[q].row(i);
        dpair[q].row(i) += g * w.transpose();
        dpair[q].array() += w.array().rowwise() * g.array();
        // dw(k,j) = (yhat(i,k) + yhat(k,j)) * g(j)
        Mat<Scalar> s = yhat;
        s.colwise() += yhat.row(i).transpose();
        dw[q] = (s.array().rowwise() * g.array()).matrix();
      }
      // Softmax over labels, per (k, j).
      Mat<Scalar> inner = Mat<Scalar>::Zero(n, n);
      for (int q = 0; q < 4; ++q) inner += r.triple_weights[q][i].cwiseProduct(dw[q]);
      for (int q = 0; q < 4; ++q) {
        const Mat<Scalar> draw = r.triple_weights[q][i].cwiseProduct(dw[q] - inner);
        Eigen::Map<const Mat<Scalar>> form(r.slices[q].col(i).data(), h, h);
        const Mat<Scalar> v = r.middle[q] * form;  // n x h, rows k
        const Mat<Scalar> dv = draw * r.last[q];
        dlast[q].noalias() += draw.transpose() * v;
        dmiddle[q].noalias() += dv * form.transpose();
        Eigen::Map<Mat<Scalar>> dform(dslices[q].col(i).data(), h, h);
        dform.noalias() += r.middle[q].transpose() * dv;
      }
    }

    Mat<Scalar> dhr = Mat<Scalar>::Zero(n, h);
    for (int q = 0; q < 4; ++q) {
      const auto& tp = p.relation_triple[q];
      auto& tg = grads.relation_triple[q];
      const Mat<Scalar> aug = augment_ones(r.first[q]);
      tg.tensor.noalias() += dslices[q] * aug;
      const Mat<Scalar> daug = dslices[q].transpose() * tp.tensor;  // n x (h+1)
      dfirst[q] += daug.leftCols(h);
      mlp_backward(tp.first, r.hidden, r.first[q], dfirst[q], tg.first, dhr);
      mlp_backward(tp.middle, r.hidden, r.middle[q], dmiddle[q], tg.middle, dhr);
      mlp_backward(tp.last, r.hidden, r.last[q], dlast[q], tg.last, dhr);
    }
    biaffine_backward(r.hidden, p.relation_pair, r.pair, dpair, grads.relation_pair, dhr);
    grads.relation_proj.noalias() += t.hs.transpose() * dhr;
    grads.relation_bias += dhr.colwise().sum();
    dhs.noalias() += dhr * p.relation_proj.transpose();
  }

  if (t.hs_mask.size() > 0) dhs = dhs.cwiseProduct(t.hs_mask);

  // Syntax module or its bypass.
  Mat<Scalar> dhx;
  if (t.options.use_skem) {
    const Mat<Scalar> dz = (t.skem.output.array() > Scalar(0)).select(dhs, Scalar(0));
    grads.gcn.noalias() += t.skem.propagated.transpose() * dz;
    const Mat<Scalar> dconcat = in.adjacency.transpose() * (dz * p.gcn.transpose());
    dhx = dconcat.leftCols(p.dims.h_x);
    if (t.options.use_pos) {
      for (int i = 0; i < n; ++i) {
        int id = in.pos[i];
        if (id < 0 || id >= p.dims.pos_vocab) id = Vocabulary::kUnknown;
        grads.pos_embedding.row(id) += dconcat.row(i).tail(p.dims.h_p);
      }
    }
  } else {
    grads.skip.noalias() += t.hx.transpose() * dhs;
    dhx = dhs * p.skip.transpose();
  }
  if (t.hx_mask.size() > 0) dhx = dhx.cwiseProduct(t.hx_mask);
  for (int i = 0; i < n; ++i) {
    int id = in.tokens[i];
    if (id < 0 || id >= p.dims.vocab) id = Vocabulary::kUnknown;
    grads.token_embedding.row(id) += dhx.row(i);
  }
  return loss;
}

template <typename Scalar>
LossValue loss_of(const ModelParams<Scalar>& p, const ModelInput<Scalar>& in, const SyntaxOptions& opt,
                  const EntityGrid& ge, const RelationGrid& gr) {
  auto t = forward(p, in, opt);
  return grid_loss(t.entity.probs, t.relation.probs, ge, gr);
}

// ---------------------------------------------------------------------------
// Prediction: argmax per cell, ties resolve to none.

template <typename Scalar, typename Label>
Grid<Label> argmax_grid(const std::array<Mat<Scalar>, 4>& probs) {
  const int n = static_cast<int>(probs[0].rows());
  Grid<Label> g(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      int best = 3;
      for (int l = 0; l < 3; ++l)
        if (probs[l](i, j) > probs[best](i, j)) best = l;
      g(i, j) = static_cast<Label>(best);
    }
  return g;
}

}  // namespace gridquad
