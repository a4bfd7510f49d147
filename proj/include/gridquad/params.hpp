#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gridquad/corpus.hpp"
#include "gridquad/error.hpp"
#include "gridquad/grid.hpp"

namespace gridquad {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct ModelDims {
  int vocab = 2;      // includes <unk> at 0
  int pos_vocab = 2;  // includes <unk> at 0
  int h_x = 768;
  int h_p = 20;
  int h_s = 512;
  int h_e = 256;
  int h_r = 50;

  bool operator==(const ModelDims&) const = default;
};

inline constexpr std::array<std::string_view, 4> kEntityLabelNames = {"tgt", "asp", "opin", "none"};
inline constexpr std::array<std::string_view, 4> kRelationLabelNames = {"rel", "pos", "neg", "none"};

// Affine map followed by a rectifier; output width = input width.
template <typename Scalar>
struct Mlp {
  Mat<Scalar> weight;
  Mat<Scalar> bias;  // 1 x h
};

template <typename Scalar>
struct BiaffineLabel {
  Mlp<Scalar> left;   // MLP1
  Mlp<Scalar> right;  // MLP2
  Mat<Scalar> bilinear;
};

// Triple scorer for one relation label. `tensor` holds the h x h x (h+1) weight as an
// (h*h) x (h+1) matrix: column c is the h x h slice (column-major) that multiplies
// entry c of [MLP3(h_i); 1].
template <typename Scalar>
struct TriaffineLabel {
  Mlp<Scalar> first;   // MLP3, applied to token i
  Mlp<Scalar> middle;  // MLP4, applied to bridge token k
  Mlp<Scalar> last;    // MLP5, applied to token j
  Mat<Scalar> tensor;
};

template <typename Scalar = double>
struct ModelParams {
  ModelDims dims;
  Mat<Scalar> token_embedding;
  Mat<Scalar> pos_embedding;
  Mat<Scalar> gcn;   // (h_x + h_p) x h_s
  Mat<Scalar> skip;  // h_x x h_s, used when the syntax module is disabled
  Mat<Scalar> entity_proj;
  Mat<Scalar> entity_bias;
  std::array<BiaffineLabel<Scalar>, 4> entity;
  Mat<Scalar> relation_proj;
  Mat<Scalar> relation_bias;
  std::array<BiaffineLabel<Scalar>, 4> relation_pair;
  std::array<TriaffineLabel<Scalar>, 4> relation_triple;

  // Visits every tensor with its checkpoint key, in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& p, F& f) {
    f("token_embedding", p.token_embedding);
    f("pos_embedding", p.pos_embedding);
    f("gcn.weight", p.gcn);
    f("skip.weight", p.skip);
    f("entity.proj.weight", p.entity_proj);
    f("entity.proj.bias", p.entity_bias);
    for (int l = 0; l < 4; ++l) {
      const std::string base = "entity." + std::string(kEntityLabelNames[l]);
      auto& b = p.entity[l];
      f(base + ".mlp1.weight", b.left.weight);
      f(base + ".mlp1.bias", b.left.bias);
      f(base + ".mlp2.weight", b.right.weight);
      f(base + ".mlp2.bias", b.right.bias);
      f(base + ".biaffine", b.bilinear);
    }
    f("relation.proj.weight", p.relation_proj);
    f("relation.proj.bias", p.relation_bias);
    for (int q = 0; q < 4; ++q) {
      const std::string base = "relation." + std::string(kRelationLabelNames[q]);
      auto& b = p.relation_pair[q];
      f(base + ".mlp1.weight", b.left.weight);
      f(base + ".mlp1.bias", b.left.bias);
      f(base + ".mlp2.weight", b.right.weight);
      f(base + ".mlp2.bias", b.right.bias);
      f(base + ".biaffine", b.bilinear);
      auto& t = p.relation_triple[q];
      f(base + ".mlp3.weight", t.first.weight);
      f(base + ".mlp3.bias", t.first.bias);
      f(base + ".mlp4.weight", t.middle.weight);
      f(base + ".mlp4.bias", t.middle.bias);
      f(base + ".mlp5.weight", t.last.weight);
      f(base + ".mlp5.bias", t.last.bias);
      f(base + ".triaffine", t.tensor);
    }
  }
};

inline bool is_bias(std::string_view name) { return name.size() >= 5 && name.substr(name.size() - 5) == ".bias"; }

// Shapes for every tensor; all zero.
template <typename Scalar = double>
ModelParams<Scalar> zero_params(const ModelDims& d) {
  if (d.vocab < 1 || d.pos_vocab < 1 || d.h_x < 1 || d.h_p < 1 || d.h_s < 1 || d.h_e < 1 || d.h_r < 1)
    throw ContractError("model dimensions must be positive");
  ModelParams<Scalar> p;
  p.dims = d;
  auto z = [](int r, int c) { return Mat<Scalar>::Zero(r, c); };
  p.token_embedding = z(d.vocab, d.h_x);
  p.pos_embedding = z(d.pos_vocab, d.h_p);
  p.gcn = z(d.h_x + d.h_p, d.h_s);
  p.skip = z(d.h_x, d.h_s);
  p.entity_proj = z(d.h_s, d.h_e);
  p.entity_bias = z(1, d.h_e);
  p.relation_proj = z(d.h_s, d.h_r);
  p.relation_bias = z(1, d.h_r);
  auto mlp = [&](int h) { return Mlp<Scalar>{z(h, h), z(1, h)}; };
  for (int l = 0; l < 4; ++l) {
    p.entity[l] = {mlp(d.h_e), mlp(d.h_e), z(d.h_e, d.h_e)};
    p.relation_pair[l] = {mlp(d.h_r), mlp(d.h_r), z(d.h_r, d.h_r)};
    p.relation_triple[l] = {mlp(d.h_r), mlp(d.h_r), mlp(d.h_r), z(d.h_r * d.h_r, d.h_r + 1)};
  }
  return p;
}

template <typename Scalar>
ModelParams<Scalar> zeros_like(const ModelParams<Scalar>& p) {
  return zero_params<Scalar>(p.dims);
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out = zero_params<To>(p.dims);
  std::vector<const Mat<From>*> src;
  p.for_each([&](const std::string&, const Mat<From>& m) { src.push_back(&m); });
  std::size_t k = 0;
  out.for_each([&](const std::string&, Mat<To>& m) { m = src[k++]->template cast<To>(); });
  return out;
}

// Glorot-uniform weights, zero biases. The triaffine tensor uses
// fan_in = fan_out = h_r * (h_r + 1).
template <typename Scalar = double>
ModelParams<Scalar> init_params(const ModelDims& d, std::uint64_t seed) {
  ModelParams<Scalar> p = zero_params<Scalar>(d);
  std::mt19937_64 rng(seed);
  const int hr = d.h_r;
  p.for_each([&](const std::string& name, Mat<Scalar>& m) {
    if (is_bias(name)) return;
    double fan_sum = static_cast<double>(m.rows() + m.cols());
    if (name.size() > 10 && name.substr(name.size() - 10) == ".triaffine") fan_sum = 2.0 * hr * (hr + 1);
    const double bound = std::sqrt(6.0 / fan_sum);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<Scalar>(u(rng));
  });
  return p;
}

template <typename Scalar>
bool all_finite(const ModelParams<Scalar>& p, std::string* bad = nullptr) {
  bool ok = true;
  p.for_each([&](const std::string& name, const Mat<Scalar>& m) {
    if (ok && !m.allFinite()) {
      ok = false;
      if (bad) *bad = name;
    }
  });
  return ok;
}

// ---------------------------------------------------------------------------
// Vocabulary for the reference (lookup) encoder.

class Vocabulary {
 public:
  static constexpr int kUnknown = 0;

  Vocabulary() { add("<unk>"); }

  int add(const std::string& w) {
    auto [it, fresh] = index_.emplace(w, static_cast<int>(words_.size()));
    if (fresh) words_.push_back(w);
    return it->second;
  }
  int id(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? kUnknown : it->second;
  }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  static Vocabulary from_words(const std::vector<std::string>& words) {
    Vocabulary v;
    for (const auto& w : words) v.add(w);
    return v;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace gridquad
