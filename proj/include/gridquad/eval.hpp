#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridquad/corpus.hpp"
#include "gridquad/error.hpp"

namespace gridquad {

struct Prediction {
  std::string doc_id;
  QuadSet quadruples;
};

struct Score {
  long gold = 0;
  long pred = 0;
  long matched = 0;

  double precision() const { return pred == 0 ? 0.0 : static_cast<double>(matched) / pred; }
  double recall() const { return gold == 0 ? 0.0 : static_cast<double>(matched) / gold; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
  }
  Score& operator+=(const Score& o) {
    gold += o.gold;
    pred += o.pred;
    matched += o.matched;
    return *this;
  }
  bool operator==(const Score&) const = default;
};

struct EvalReport {
  std::map<Role, Score> entity;
  std::map<RelationType, Score> relation;
  Score quadruple;
  bool operator==(const EvalReport&) const = default;
};

namespace detail {
template <typename Set>
long intersection_size(const Set& a, const Set& b) {
  long n = 0;
  for (const auto& x : a) n += b.count(x);
  return n;
}

inline void check_alignment(const std::vector<Prediction>& pred, const Corpus& gold) {
  if (pred.size() != gold.size())
    throw DataError("prediction count " + std::to_string(pred.size()) + " != gold count " +
                    std::to_string(gold.size()));
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i].doc_id != gold[i].doc_id)
      throw DataError("document id mismatch at position " + std::to_string(i) + ": '" + pred[i].doc_id +
                      "' vs '" + gold[i].doc_id + "'");
}
}  // namespace detail

// Exact-match micro P/R/F1 for entities, relations and quadruples.
inline EvalReport evaluate(const std::vector<Prediction>& predictions, const Corpus& gold) {
  detail::check_alignment(predictions, gold);
  EvalReport rep;
  for (Role r : kRoles) rep.entity[r] = {};
  for (RelationType t : kRelationTypes) rep.relation[t] = {};
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const QuadSet g = gold[d].quad_set();
    const QuadSet& p = predictions[d].quadruples;
    rep.quadruple += {static_cast<long>(g.size()), static_cast<long>(p.size()), detail::intersection_size(p, g)};

    const EntitySet ge = entities_of(g), pe = entities_of(p);
    for (const auto& e : ge) ++rep.entity[e.first].gold;
    for (const auto& e : pe) {
      ++rep.entity[e.first].pred;
      if (ge.count(e)) ++rep.entity[e.first].matched;
    }
    const PairSet gr = relations_of(g), pr = relations_of(p);
    for (const auto& x : gr) ++rep.relation[std::get<0>(x)].gold;
    for (const auto& x : pr) {
      ++rep.relation[std::get<0>(x)].pred;
      if (gr.count(x)) ++rep.relation[std::get<0>(x)].matched;
    }
  }
  return rep;
}

inline json to_json(const Score& s) {
  return {{"P", s.precision()}, {"R", s.recall()},       {"F1", s.f1()},
          {"gold", s.gold},     {"pred", s.pred},         {"matched", s.matched}};
}

inline json to_json(const EvalReport& r) {
  json j;
  for (const auto& [role, s] : r.entity) j["entity"][std::string(role_code(role))] = to_json(s);
  for (const auto& [t, s] : r.relation) j["relation"][std::string(relation_code(t))] = to_json(s);
  j["quadruple"] = to_json(r.quadruple);
  return j;
}

// ---------------------------------------------------------------------------
// Error taxonomy

struct ErrorBreakdown {
  long total_gold = 0;
  std::map<Role, long> entity{{Role::target, 0}, {Role::aspect, 0}, {Role::opinion, 0}};
  std::map<RelationType, long> relation{{RelationType::ta, 0}, {RelationType::to, 0}, {RelationType::ao, 0}};
  long pos_to_neg = 0;
  long neg_to_pos = 0;

  double rate(long count) const { return total_gold == 0 ? 0.0 : static_cast<double>(count) / total_gold; }
};

namespace detail {
inline int shared_components(const Quadruple& a, const Quadruple& b) {
  return (a.target == b.target) + (a.aspect == b.aspect) + (a.opinion == b.opinion);
}
}  // namespace detail

inline ErrorBreakdown error_analysis(const std::vector<Prediction>& predictions, const Corpus& gold) {
  detail::check_alignment(predictions, gold);
  ErrorBreakdown out;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const QuadSet g = gold[d].quad_set();
    const QuadSet& p = predictions[d].quadruples;
    out.total_gold += static_cast<long>(g.size());
    const EntitySet pe = entities_of(p);
    const PairSet pr = relations_of(p);

    for (const Quadruple& gq : g) {
      if (p.count(gq)) continue;
      const Quadruple* best = nullptr;
      int best_shared = 0;
      for (const Quadruple& pq : p) {
        int s = detail::shared_components(gq, pq);
        if (s > best_shared) {
          best_shared = s;
          best = &pq;
        }
      }
      if (!best) {
        for (Role r : kRoles) ++out.entity[r];
        continue;
      }
      if (best_shared == 3) {
        ++(gq.sentiment == Sentiment::pos ? out.pos_to_neg : out.neg_to_pos);
        continue;
      }

      std::map<RelationType, bool> hit;
      auto linking = [&](Role role) {
        auto check = [&](RelationType t, const Span& a, const Span& b) {
          if (!pr.count({t, a, b})) hit[t] = true;
        };
        if (role != Role::opinion && gq.aspect) check(RelationType::ta, gq.target, *gq.aspect);
        if (role != Role::aspect) check(RelationType::to, gq.target, gq.opinion);
        if (role != Role::target && gq.aspect) check(RelationType::ao, *gq.aspect, gq.opinion);
      };
      if (best->target != gq.target) {
        if (pe.count({Role::target, gq.target})) linking(Role::target);
        else ++out.entity[Role::target];
      }
      if (best->aspect != gq.aspect) {
        if (gq.aspect && pe.count({Role::aspect, *gq.aspect})) linking(Role::aspect);
        else ++out.entity[Role::aspect];
      }
      if (best->opinion != gq.opinion) {
        if (pe.count({Role::opinion, gq.opinion})) linking(Role::opinion);
        else ++out.entity[Role::opinion];
      }
      for (const auto& [t, flag] : hit)
        if (flag) ++out.relation[t];
    }
  }
  return out;
}

inline json to_json(const ErrorBreakdown& e) {
  json j;
  j["total_gold_quadruples"] = e.total_gold;
  for (const auto& [r, c] : e.entity)
    j["entity_errors"][std::string(role_code(r))] = {{"count", c}, {"rate", e.rate(c)}};
  for (const auto& [t, c] : e.relation)
    j["relation_errors"][std::string(relation_code(t))] = {{"count", c}, {"rate", e.rate(c)}};
  j["sentiment_errors"]["pos->neg"] = {{"count", e.pos_to_neg}, {"rate", e.rate(e.pos_to_neg)}};
  j["sentiment_errors"]["neg->pos"] = {{"count", e.neg_to_pos}, {"rate", e.rate(e.neg_to_pos)}};
  return j;
}

}  // namespace gridquad
