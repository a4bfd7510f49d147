#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gridquad/corpus.hpp"
#include "gridquad/error.hpp"

namespace gridquad {

// Label order is the softmax order used by the scorers.
enum class EntityLabel : std::uint8_t { tgt = 0, asp = 1, opin = 2, none = 3 };
enum class RelationLabel : std::uint8_t { rel = 0, pos = 1, neg = 2, none = 3 };

inline constexpr int kNumLabels = 4;

inline EntityLabel entity_label(Role r) {
  switch (r) {
    case Role::target: return EntityLabel::tgt;
    case Role::aspect: return EntityLabel::asp;
    case Role::opinion: return EntityLabel::opin;
  }
  return EntityLabel::none;
}

inline RelationLabel sentiment_label(Sentiment s) {
  return s == Sentiment::pos ? RelationLabel::pos : RelationLabel::neg;
}

template <typename Label>
class Grid {
 public:
  Grid() = default;
  explicit Grid(int n) : n_(n), cells_(static_cast<std::size_t>(n) * n, Label::none) {}

  int size() const { return n_; }
  Label operator()(int i, int j) const { return cells_[index(i, j)]; }
  Label& operator()(int i, int j) { return cells_[index(i, j)]; }

  bool operator==(const Grid&) const = default;

  // Non-none cells in row-major order.
  std::vector<std::pair<std::pair<int, int>, Label>> filled() const {
    std::vector<std::pair<std::pair<int, int>, Label>> out;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if ((*this)(i, j) != Label::none) out.push_back({{i, j}, (*this)(i, j)});
    return out;
  }

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }
  int n_ = 0;
  std::vector<Label> cells_;
};

using EntityGrid = Grid<EntityLabel>;
using RelationGrid = Grid<RelationLabel>;

// ---------------------------------------------------------------------------
// Representability

enum class ConflictKind {
  entity_cell,       // two roles on one (head, tail) cell
  sentiment_clash,   // same (target head, opinion head), different sentiment
  spurious_chain,    // encode -> decode does not reproduce the gold set
  null_aspect_mix,   // null-aspect and aspect-bearing quadruple on one (T, O)
  relation_cell,     // rel cell and sentiment cell land on the same position
};

inline std::string_view to_string(ConflictKind k) {
  switch (k) {
    case ConflictKind::entity_cell: return "entity_cell";
    case ConflictKind::sentiment_clash: return "sentiment_clash";
    case ConflictKind::spurious_chain: return "spurious_chain";
    case ConflictKind::null_aspect_mix: return "null_aspect_mix";
    case ConflictKind::relation_cell: return "relation_cell";
  }
  return "?";
}

struct Conflict {
  ConflictKind kind;
  std::string detail;
};

struct RepresentabilityReport {
  std::vector<Conflict> conflicts;
  bool ok() const { return conflicts.empty(); }
  bool has(ConflictKind k) const {
    for (const auto& c : conflicts)
      if (c.kind == k) return true;
    return false;
  }
};

struct DecodeResult {
  QuadSet quadruples;
  std::vector<std::string> trace;  // one line per dropped cell
};

namespace detail {

inline std::string cell_name(int i, int j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

// First writer wins; every disagreement is reported.
inline std::pair<EntityGrid, RelationGrid> encode_lenient(const Document& doc,
                                                          std::vector<Conflict>* conflicts) {
  const int n = doc.size();
  EntityGrid eg(n);
  RelationGrid rg(n);
  auto put_entity = [&](Role role, const Span& s) {
    EntityLabel want = entity_label(role);
    EntityLabel& cell = eg(s.head(), s.last());
    if (cell == EntityLabel::none) {
      cell = want;
    } else if (cell != want && conflicts) {
      conflicts->push_back({ConflictKind::entity_cell,
                            "entity cell " + cell_name(s.head(), s.last()) + " claimed by two roles"});
    }
  };
  for (const auto& [role, span] : entities_of(doc.quadruples)) put_entity(role, span);

  auto put_relation = [&](int i, int j, RelationLabel want) {
    RelationLabel& cell = rg(i, j);
    if (cell == RelationLabel::none) {
      cell = want;
      return;
    }
    if (cell == want || !conflicts) return;
    bool both_sentiment = cell != RelationLabel::rel && want != RelationLabel::rel;
    conflicts->push_back({both_sentiment ? ConflictKind::sentiment_clash : ConflictKind::relation_cell,
                          "relation cell " + cell_name(i, j) + " needs two labels"});
  };
  // Sentiment cells first so a clash with rel is attributed consistently.
  for (const Quadruple& q : doc.quad_set()) put_relation(q.target.head(), q.opinion.head(), sentiment_label(q.sentiment));
  for (const Quadruple& q : doc.quad_set()) {
    if (!q.aspect) continue;
    put_relation(q.target.head(), q.aspect->head(), RelationLabel::rel);
    put_relation(q.aspect->head(), q.opinion.head(), RelationLabel::rel);
  }
  return {std::move(eg), std::move(rg)};
}

}  // namespace detail

inline DecodeResult decode_quadruples(const EntityGrid& eg, const RelationGrid& rg) {
  if (eg.size() != rg.size()) throw ContractError("entity and relation grids differ in size");
  const int n = eg.size();
  DecodeResult out;

  // Spans per role keyed by head token.
  std::array<std::multimap<int, Span>, 3> by_head;
  for (int h = 0; h < n; ++h) {
    for (int t = 0; t < n; ++t) {
      EntityLabel l = eg(h, t);
      if (l == EntityLabel::none) continue;
      if (h > t) {
        out.trace.push_back("entity cell " + detail::cell_name(h, t) + " below diagonal dropped");
        continue;
      }
      by_head[static_cast<int>(l)].emplace(h, Span{h, t + 1});
    }
  }
  const auto& targets = by_head[0];
  const auto& aspects = by_head[1];
  const auto& opinions = by_head[2];

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      RelationLabel l = rg(i, j);
      if (l != RelationLabel::pos && l != RelationLabel::neg) continue;
      if (!targets.count(i) || !opinions.count(j)) {
        out.trace.push_back("sentiment cell " + detail::cell_name(i, j) +
                            (targets.count(i) ? " has no opinion head" : " has no target head") + ", dropped");
        continue;
      }
      Sentiment s = l == RelationLabel::pos ? Sentiment::pos : Sentiment::neg;
      std::vector<std::optional<Span>> chained;
      for (const auto& [k, aspect] : aspects) {
        if (rg(i, k) == RelationLabel::rel && rg(k, j) == RelationLabel::rel) chained.emplace_back(aspect);
      }
      if (chained.empty()) chained.emplace_back(std::nullopt);
      auto [tb, te] = targets.equal_range(i);
      auto [ob, oe] = opinions.equal_range(j);
      for (auto t = tb; t != te; ++t)
        for (auto o = ob; o != oe; ++o)
          for (const auto& a : chained) out.quadruples.insert({t->second, a, o->second, s});
    }
  }
  return out;
}

inline RepresentabilityReport check_representable(const Document& doc) {
  RepresentabilityReport report;
  auto [eg, rg] = detail::encode_lenient(doc, &report.conflicts);

  std::map<std::pair<Span, Span>, std::pair<bool, bool>> has_null_and_aspect;
  for (const Quadruple& q : doc.quadruples) {
    auto& flags = has_null_and_aspect[{q.target, q.opinion}];
    (q.aspect ? flags.second : flags.first) = true;
  }
  for (const auto& [key, flags] : has_null_and_aspect) {
    if (flags.first && flags.second) {
      report.conflicts.push_back({ConflictKind::null_aspect_mix,
                                  "target " + detail::cell_name(key.first.begin, key.first.end) + " / opinion " +
                                      detail::cell_name(key.second.begin, key.second.end) +
                                      " has both null-aspect and aspect quadruples"});
    }
  }

  if (decode_quadruples(eg, rg).quadruples != doc.quad_set()) {
    report.conflicts.push_back({ConflictKind::spurious_chain, "encode -> decode does not reproduce the gold set"});
  }
  return report;
}

inline std::pair<EntityGrid, RelationGrid> encode_grids(const Document& doc) {
  auto report = check_representable(doc);
  if (!report.ok()) {
    const auto& c = report.conflicts.front();
    throw EncodingError("document '" + doc.doc_id + "' is not grid-representable: " + std::string(to_string(c.kind)) +
                        ": " + c.detail);
  }
  return detail::encode_lenient(doc, nullptr);
}

// ---------------------------------------------------------------------------
// Debug dump: one line per row, one char per cell.

inline char dump_code(EntityLabel l) {
  switch (l) {
    case EntityLabel::tgt: return 'T';
    case EntityLabel::asp: return 'A';
    case EntityLabel::opin: return 'O';
    case EntityLabel::none: return '.';
  }
  return '?';
}

inline char dump_code(RelationLabel l) {
  switch (l) {
    case RelationLabel::rel: return 'R';
    case RelationLabel::pos: return '+';
    case RelationLabel::neg: return '-';
    case RelationLabel::none: return '.';
  }
  return '?';
}

template <typename Label>
std::string dump_grid(const Grid<Label>& g) {
  std::string out;
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) out.push_back(dump_code(g(i, j)));
    out.push_back('\n');
  }
  return out;
}

}  // namespace gridquad
