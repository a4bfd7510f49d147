#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridquad/corpus.hpp"
#include "gridquad/error.hpp"

namespace gridquad {

// ---------------------------------------------------------------------------
// BRAT standoff graph

enum class EntityTag { tar, asp, opin };
enum class RelationTag { tar_asp, asp_opin, pos, neg };

inline std::string_view to_string(EntityTag t) {
  switch (t) {
    case EntityTag::tar: return "TAR";
    case EntityTag::asp: return "ASP";
    case EntityTag::opin: return "OPIN";
  }
  return "?";
}

inline std::string_view to_string(RelationTag t) {
  switch (t) {
    case RelationTag::tar_asp: return "TAR-ASP";
    case RelationTag::asp_opin: return "ASP-OPIN";
    case RelationTag::pos: return "POS";
    case RelationTag::neg: return "NEG";
  }
  return "?";
}

struct AnnEntity {
  EntityTag tag;
  int begin = 0;  // character offsets, end-exclusive
  int end = 0;
  std::string surface;
  bool operator==(const AnnEntity&) const = default;
};

struct AnnRelation {
  RelationTag tag;
  std::string arg1;
  std::string arg2;
  bool operator==(const AnnRelation&) const = default;
};

struct AnnGraph {
  std::map<std::string, AnnEntity> entities;
  std::map<std::string, AnnRelation> relations;
  bool operator==(const AnnGraph&) const = default;
};

namespace detail {

// Byte offset of every code point boundary: result[k] is where code point k starts,
// result.back() == text.size().
inline std::vector<std::size_t> codepoint_offsets(std::string_view text) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) out.push_back(i);
  }
  out.push_back(text.size());
  return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool is_id(std::string_view s, char kind) {
  if (s.size() < 2 || s[0] != kind) return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline int id_number(const std::string& id) { return std::stoi(id.substr(1)); }

}  // namespace detail

inline AnnGraph parse_ann(std::string_view ann_text, std::string_view doc_text) {
  AnnGraph g;
  const auto cp = detail::codepoint_offsets(doc_text);
  const int text_len = static_cast<int>(cp.size()) - 1;
  std::vector<std::pair<std::size_t, std::pair<std::string, AnnRelation>>> pending;

  std::size_t lineno = 0;
  for (std::string_view line : detail::split(ann_text, '\n')) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    auto fields = detail::split(line, '\t');
    const std::string id(fields[0]);

    if (detail::is_id(id, 'T')) {
      if (fields.size() != 3) throw ParseError(lineno, "entity line needs 3 tab-separated fields");
      auto parts = detail::split(fields[1], ' ');
      if (parts.size() != 3) throw ParseError(lineno, "entity annotation must be '<TAG> <begin> <end>'");
      AnnEntity e{};
      if (parts[0] == "TAR") e.tag = EntityTag::tar;
      else if (parts[0] == "ASP") e.tag = EntityTag::asp;
      else if (parts[0] == "OPIN") e.tag = EntityTag::opin;
      else throw SchemaError("line " + std::to_string(lineno) + ": unknown entity tag '" + std::string(parts[0]) + "'");
      if (!detail::parse_int(parts[1], e.begin) || !detail::parse_int(parts[2], e.end))
        throw ParseError(lineno, "entity offsets must be integers");
      e.surface = std::string(fields[2]);
      if (e.begin < 0 || e.begin >= e.end || e.end > text_len)
        throw IntegrityError("line " + std::to_string(lineno) + ": entity " + id + " offsets [" +
                             std::to_string(e.begin) + ", " + std::to_string(e.end) + ") outside text");
      std::string_view actual = doc_text.substr(cp[e.begin], cp[e.end] - cp[e.begin]);
      if (actual != e.surface)
        throw IntegrityError("line " + std::to_string(lineno) + ": entity " + id + " surface '" + e.surface +
                             "' does not match text '" + std::string(actual) + "'");
      if (!g.entities.emplace(id, std::move(e)).second) throw ParseError(lineno, "duplicate id " + id);
    } else if (detail::is_id(id, 'R')) {
      if (fields.size() < 2 || fields.size() > 3 || (fields.size() == 3 && !fields[2].empty()))
        throw ParseError(lineno, "relation line must be 'R<k>\\t<TAG> Arg1:T<i> Arg2:T<j>'");
      auto parts = detail::split(fields[1], ' ');
      if (parts.size() != 3 || parts[1].substr(0, 5) != "Arg1:" || parts[2].substr(0, 5) != "Arg2:")
        throw ParseError(lineno, "relation annotation must be '<TAG> Arg1:T<i> Arg2:T<j>'");
      AnnRelation r{};
      if (parts[0] == "TAR-ASP") r.tag = RelationTag::tar_asp;
      else if (parts[0] == "ASP-OPIN") r.tag = RelationTag::asp_opin;
      else if (parts[0] == "POS") r.tag = RelationTag::pos;
      else if (parts[0] == "NEG") r.tag = RelationTag::neg;
      else throw SchemaError("line " + std::to_string(lineno) + ": unknown relation tag '" + std::string(parts[0]) + "'");
      r.arg1 = std::string(parts[1].substr(5));
      r.arg2 = std::string(parts[2].substr(5));
      if (!detail::is_id(r.arg1, 'T') || !detail::is_id(r.arg2, 'T'))
        throw ParseError(lineno, "relation arguments must be entity ids");
      pending.push_back({lineno, {id, std::move(r)}});
    } else {
      throw ParseError(lineno, "unsupported annotation line kind '" + id + "'");
    }
  }

  // Relations may precede the entities they reference.
  for (auto& [ln, entry] : pending) {
    auto& [id, r] = entry;
    auto a1 = g.entities.find(r.arg1);
    auto a2 = g.entities.find(r.arg2);
    if (a1 == g.entities.end() || a2 == g.entities.end())
      throw SchemaError("line " + std::to_string(ln) + ": relation " + id + " has dangling argument " +
                        (a1 == g.entities.end() ? r.arg1 : r.arg2));
    EntityTag want1 = r.tag == RelationTag::asp_opin ? EntityTag::asp : EntityTag::tar;
    EntityTag want2 = r.tag == RelationTag::tar_asp ? EntityTag::asp : EntityTag::opin;
    if (a1->second.tag != want1 || a2->second.tag != want2)
      throw SchemaError("line " + std::to_string(ln) + ": relation " + id + " (" + std::string(to_string(r.tag)) +
                        ") links " + std::string(to_string(a1->second.tag)) + " -> " +
                        std::string(to_string(a2->second.tag)));
    if (!g.relations.emplace(id, std::move(r)).second) throw ParseError(ln, "duplicate id " + id);
  }
  return g;
}

// Entities first, then relations, each by numeric id.
inline std::string serialize_ann(const AnnGraph& g) {
  auto by_number = [](const auto& m) {
    std::vector<const typename std::decay_t<decltype(m)>::value_type*> v;
    for (const auto& kv : m) v.push_back(&kv);
    std::sort(v.begin(), v.end(), [](auto* a, auto* b) {
      return detail::id_number(a->first) < detail::id_number(b->first);
    });
    return v;
  };
  std::ostringstream out;
  for (const auto* kv : by_number(g.entities)) {
    const auto& e = kv->second;
    out << kv->first << '\t' << to_string(e.tag) << ' ' << e.begin << ' ' << e.end << '\t' << e.surface << '\n';
  }
  for (const auto* kv : by_number(g.relations)) {
    const auto& r = kv->second;
    out << kv->first << '\t' << to_string(r.tag) << " Arg1:" << r.arg1 << " Arg2:" << r.arg2 << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Token sidecar: "begin end [POS [HEAD DEPREL]]" per token, blank line = sentence break.

struct TokenLayer {
  std::vector<std::pair<int, int>> char_offsets;
  std::vector<std::string> pos;
  std::vector<DepEdge> deps;
  std::vector<Span> sentences;
};

inline TokenLayer parse_token_layer(std::string_view text) {
  TokenLayer layer;
  int sentence_begin = 0;
  std::size_t lineno = 0;
  bool any_pos = false;
  auto close_sentence = [&] {
    const int n = static_cast<int>(layer.char_offsets.size());
    if (n > sentence_begin) layer.sentences.push_back({sentence_begin, n});
    sentence_begin = n;
  };
  for (std::string_view line : detail::split(text, '\n')) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      close_sentence();
      continue;
    }
    std::vector<std::string_view> cols;
    for (auto c : detail::split(line, line.find('\t') != std::string_view::npos ? '\t' : ' '))
      if (!c.empty()) cols.push_back(c);
    if (cols.size() != 2 && cols.size() != 3 && cols.size() != 5)
      throw ParseError(lineno, "token line must be 'begin end [POS [HEAD DEPREL]]'");
    int b = 0, e = 0;
    if (!detail::parse_int(cols[0], b) || !detail::parse_int(cols[1], e) || b < 0 || e <= b)
      throw ParseError(lineno, "bad token offsets");
    const int index = static_cast<int>(layer.char_offsets.size());
    layer.char_offsets.emplace_back(b, e);
    if (cols.size() >= 3) {
      any_pos = true;
      layer.pos.emplace_back(cols[2]);
    } else {
      layer.pos.emplace_back("_");
    }
    if (cols.size() == 5) {
      int head = 0;
      if (!detail::parse_int(cols[3], head) || head < 0) throw ParseError(lineno, "bad dependency head");
      if (head > 0) layer.deps.push_back({head - 1, index, std::string(cols[4])});
    }
  }
  close_sentence();
  if (!any_pos) layer.pos.assign(layer.char_offsets.size(), "_");
  return layer;
}

// ---------------------------------------------------------------------------
// ANN graph -> Document

inline Document ann_to_document(const AnnGraph& g, std::string doc_id, std::string lang, std::string text,
                                const TokenLayer& layer) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.lang = std::move(lang);
  const auto cp = detail::codepoint_offsets(text);
  const int text_len = static_cast<int>(cp.size()) - 1;

  std::map<int, int> token_at_begin, token_at_end;
  for (int i = 0; i < static_cast<int>(layer.char_offsets.size()); ++i) {
    auto [b, e] = layer.char_offsets[i];
    if (e > text_len) throw AlignmentError("token " + std::to_string(i) + " extends past the end of the text");
    doc.tokens.emplace_back(text.substr(cp[b], cp[e] - cp[b]));
    token_at_begin[b] = i;
    token_at_end[e] = i;
  }
  doc.pos = layer.pos;
  doc.deps = layer.deps;
  doc.sentences = layer.sentences;
  doc.text = std::move(text);

  std::map<std::string, Span> spans;
  for (const auto& [id, e] : g.entities) {
    auto b = token_at_begin.find(e.begin);
    auto en = token_at_end.find(e.end);
    if (b == token_at_begin.end() || en == token_at_end.end() || en->second < b->second)
      throw AlignmentError("entity " + id + " [" + std::to_string(e.begin) + ", " + std::to_string(e.end) + ") '" +
                           e.surface + "' does not align with token boundaries");
    spans[id] = {b->second, en->second + 1};
  }

  std::set<std::pair<std::string, std::string>> tar_asp, asp_opin;
  std::map<std::pair<std::string, std::string>, Sentiment> sentiment;
  for (const auto& [id, r] : g.relations) {
    if (r.tag == RelationTag::tar_asp) {
      tar_asp.emplace(r.arg1, r.arg2);
    } else if (r.tag == RelationTag::asp_opin) {
      asp_opin.emplace(r.arg1, r.arg2);
    } else {
      Sentiment s = r.tag == RelationTag::pos ? Sentiment::pos : Sentiment::neg;
      auto [it, fresh] = sentiment.emplace(std::make_pair(r.arg1, r.arg2), s);
      if (!fresh && it->second != s)
        throw ContradictionError("both POS and NEG between " + r.arg1 + " and " + r.arg2);
    }
  }

  QuadSet quads;
  for (const auto& [to, s] : sentiment) {
    const auto& [t, o] = to;
    bool chained = false;
    for (const auto& [a_id, e] : g.entities) {
      if (e.tag != EntityTag::asp) continue;
      if (tar_asp.count({t, a_id}) && asp_opin.count({a_id, o})) {
        quads.insert({spans.at(t), spans.at(a_id), spans.at(o), s});
        chained = true;
      }
    }
    if (!chained) quads.insert({spans.at(t), std::nullopt, spans.at(o), s});
  }
  doc.quadruples.assign(quads.begin(), quads.end());
  require_valid(doc);
  return doc;
}

// ---------------------------------------------------------------------------
// Splitting

struct Splits {
  Corpus train, dev, test;
};

struct SplitRatio {
  double train = 8, dev = 1, test = 1;
};

inline Splits split_corpus(const Corpus& corpus, SplitRatio ratio, std::uint64_t seed) {
  const double sum = ratio.train + ratio.dev + ratio.test;
  if (!(ratio.train > 0 && ratio.dev > 0 && ratio.test > 0 && std::isfinite(sum)))
    throw ContractError("split ratios must be positive");
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  // Multiply before dividing so integral ratios cut exactly.
  const auto cut1 = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio.train / sum));
  const auto cut2 = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (ratio.train + ratio.dev) / sum));
  Splits s;
  for (std::size_t k = 0; k < n; ++k) {
    Corpus& dst = k < cut1 ? s.train : (k < cut2 ? s.dev : s.test);
    dst.push_back(corpus[order[k]]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Inter-annotator agreement

struct Agreement {
  double observed = 0;  // P_o
  double chance = 0;    // P_e
  double kappa = 0;
};

inline double cohen_kappa(double p_o, double p_e) {
  if (!(p_o >= 0 && p_o <= 1 && p_e >= 0 && p_e <= 1)) throw ContractError("agreement fractions must lie in [0,1]");
  if (p_e == 1.0) throw NumericError("kappa is undefined when chance agreement is 1");
  return (p_o - p_e) / (1.0 - p_e);
}

inline Agreement cohen_kappa_from_labels(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw ContractError("annotators labelled different numbers of items");
  if (a.empty()) throw ContractError("no paired labels");
  const double n = static_cast<double>(a.size());
  std::map<std::string, double> ma, mb;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    ma[a[i]] += 1;
    mb[b[i]] += 1;
  }
  Agreement r;
  r.observed = agree / n;
  for (const auto& [label, count] : ma) {
    auto it = mb.find(label);
    if (it != mb.end()) r.chance += (count / n) * (it->second / n);
  }
  r.kappa = cohen_kappa(r.observed, r.chance);
  return r;
}

// Layer name -> paired labels (annotator A, annotator B).
using AgreementInput = std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>>;

inline std::map<std::string, Agreement> cohen_kappa_by_layer(const AgreementInput& input) {
  std::map<std::string, Agreement> out;
  for (const auto& [layer, labels] : input) out[layer] = cohen_kappa_from_labels(labels.first, labels.second);
  return out;
}

// "layer<TAB>labelA<TAB>labelB" per line.
inline AgreementInput parse_agreement_tsv(std::string_view text) {
  AgreementInput in;
  std::size_t lineno = 0;
  for (std::string_view line : detail::split(text, '\n')) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line[0] == '#') continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() != 3) throw ParseError(lineno, "expected 'layer<TAB>labelA<TAB>labelB'");
    auto& pair = in[std::string(cols[0])];
    pair.first.emplace_back(cols[1]);
    pair.second.emplace_back(cols[2]);
  }
  return in;
}

}  // namespace gridquad
