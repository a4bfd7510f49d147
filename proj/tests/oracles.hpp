#pragma once

#include <algorithm>
#include <array>
#include <random>
#include <vector>

#include "gridquad/gridquad.hpp"

namespace gridquad::testing {

// Brute-force micro counts: linear scans over deduplicated vectors, no std::set lookups.
struct OracleCounts {
  std::array<std::array<long, 3>, 3> entity{};    // [role][gold, pred, matched]
  std::array<std::array<long, 3>, 3> relation{};  // [type][gold, pred, matched]
  std::array<long, 3> quadruple{};
};

template <typename T>
std::vector<T> dedupe(std::vector<T> v) {
  std::vector<T> out;
  for (const auto& x : v)
    if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
  return out;
}

template <typename T>
long overlap(const std::vector<T>& a, const std::vector<T>& b) {
  long n = 0;
  for (const auto& x : a)
    for (const auto& y : b)
      if (x == y) ++n;
  return n;
}

inline OracleCounts oracle_counts(const std::vector<std::vector<Quadruple>>& pred,
                                  const std::vector<std::vector<Quadruple>>& gold) {
  OracleCounts c;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const auto g = dedupe(gold[d]), p = dedupe(pred[d]);
    c.quadruple[0] += static_cast<long>(g.size());
    c.quadruple[1] += static_cast<long>(p.size());
    c.quadruple[2] += overlap(p, g);
    for (int role = 0; role < 3; ++role) {
      auto spans = [&](const std::vector<Quadruple>& qs) {
        std::vector<Span> v;
        for (const auto& q : qs) {
          if (role == 0) v.push_back(q.target);
          if (role == 1 && q.aspect) v.push_back(*q.aspect);
          if (role == 2) v.push_back(q.opinion);
        }
        return dedupe(v);
      };
      const auto gs = spans(g), ps = spans(p);
      c.entity[role][0] += static_cast<long>(gs.size());
      c.entity[role][1] += static_cast<long>(ps.size());
      c.entity[role][2] += overlap(ps, gs);
    }
    for (int type = 0; type < 3; ++type) {
      auto pairs = [&](const std::vector<Quadruple>& qs) {
        std::vector<std::pair<Span, Span>> v;
        for (const auto& q : qs) {
          if (type == 0 && q.aspect) v.push_back({q.target, *q.aspect});
          if (type == 1) v.push_back({q.target, q.opinion});
          if (type == 2 && q.aspect) v.push_back({*q.aspect, q.opinion});
        }
        return dedupe(v);
      };
      const auto gs = pairs(g), ps = pairs(p);
      c.relation[type][0] += static_cast<long>(gs.size());
      c.relation[type][1] += static_cast<long>(ps.size());
      c.relation[type][2] += overlap(ps, gs);
    }
  }
  return c;
}

inline bool counts_match(const EvalReport& r, const OracleCounts& c) {
  auto same = [](const Score& s, const std::array<long, 3>& a) {
    return s.gold == a[0] && s.pred == a[1] && s.matched == a[2];
  };
  for (int k = 0; k < 3; ++k) {
    if (!same(r.entity.at(kRoles[k]), c.entity[k])) return false;
    if (!same(r.relation.at(kRelationTypes[k]), c.relation[k])) return false;
  }
  return same(r.quadruple, c.quadruple);
}

// Random quadruples over a small token range so predictions and gold overlap often.
inline std::vector<Quadruple> random_quads(std::mt19937_64& rng, int n_tokens, int count) {
  std::uniform_int_distribution<int> pos(0, n_tokens - 1), len(1, 2), coin(0, 3);
  auto span = [&] {
    int b = pos(rng);
    return Span{b, std::min(n_tokens, b + len(rng))};
  };
  std::vector<Quadruple> out;
  for (int i = 0; i < count; ++i) {
    Quadruple q{span(), std::nullopt, span(), coin(rng) % 2 ? Sentiment::pos : Sentiment::neg};
    if (coin(rng) != 0) q.aspect = span();
    out.push_back(q);
  }
  return out;
}

// One round of the metric-oracle comparison over `docs` random documents.
inline bool metric_oracle_agrees(std::uint64_t seed, int docs = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(0, 6);
  Corpus gold;
  std::vector<Prediction> pred;
  std::vector<std::vector<Quadruple>> gv, pv;
  for (int d = 0; d < docs; ++d) {
    Document doc;
    doc.doc_id = "d" + std::to_string(d);
    doc.tokens.assign(6, "x");
    doc.sentences = {{0, 6}};
    doc.pos.assign(6, "X");
    doc.quadruples = random_quads(rng, 6, count(rng));
    auto p = random_quads(rng, 6, count(rng));
    // Reuse some gold quads so matches are not rare.
    for (const auto& q : doc.quadruples)
      if (rng() % 2) p.push_back(q);
    gv.push_back(doc.quadruples);
    pv.push_back(p);
    pred.push_back({doc.doc_id, QuadSet(p.begin(), p.end())});
    gold.push_back(std::move(doc));
  }
  return counts_match(evaluate(pred, gold), oracle_counts(pv, gv));
}

}  // namespace gridquad::testing
