#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridquad/error.hpp"

namespace gridquad {

using json = nlohmann::json;

// Token span, end-exclusive.
struct Span {
  int begin = 0;
  int end = 0;

  int length() const { return end - begin; }
  int head() const { return begin; }
  int last() const { return end - 1; }

  auto operator<=>(const Span&) const = default;
};

enum class Sentiment { pos, neg };

inline std::string_view to_string(Sentiment s) { return s == Sentiment::pos ? "pos" : "neg"; }

inline Sentiment parse_sentiment(std::string_view s) {
  if (s == "pos") return Sentiment::pos;
  if (s == "neg") return Sentiment::neg;
  throw DataError("unknown sentiment '" + std::string(s) + "'");
}

struct Quadruple {
  Span target;
  std::optional<Span> aspect;
  Span opinion;
  Sentiment sentiment = Sentiment::pos;

  auto operator<=>(const Quadruple&) const = default;
};

using QuadSet = std::set<Quadruple>;

struct DepEdge {
  int head = 0;
  int dependent = 0;
  std::string label;

  auto operator<=>(const DepEdge&) const = default;
};

struct Document {
  std::string doc_id;
  std::string lang;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<Span> sentences;
  std::vector<std::string> pos;
  std::vector<DepEdge> deps;
  std::vector<Quadruple> quadruples;

  int size() const { return static_cast<int>(tokens.size()); }
  QuadSet quad_set() const { return {quadruples.begin(), quadruples.end()}; }

  bool operator==(const Document&) const = default;
};

using Corpus = std::vector<Document>;

// ---------------------------------------------------------------------------
// Roles and derived entity / relation sets

enum class Role { target, aspect, opinion };
inline constexpr std::array<Role, 3> kRoles = {Role::target, Role::aspect, Role::opinion};

inline std::string_view role_code(Role r) {
  switch (r) {
    case Role::target: return "T";
    case Role::aspect: return "A";
    case Role::opinion: return "O";
  }
  return "?";
}

enum class RelationType { ta, to, ao };
inline constexpr std::array<RelationType, 3> kRelationTypes = {RelationType::ta, RelationType::to,
                                                               RelationType::ao};

inline std::string_view relation_code(RelationType r) {
  switch (r) {
    case RelationType::ta: return "TA";
    case RelationType::to: return "TO";
    case RelationType::ao: return "AO";
  }
  return "?";
}

using EntitySet = std::set<std::pair<Role, Span>>;
using PairSet = std::set<std::tuple<RelationType, Span, Span>>;

template <typename Quads>
EntitySet entities_of(const Quads& quads) {
  EntitySet out;
  for (const Quadruple& q : quads) {
    out.emplace(Role::target, q.target);
    if (q.aspect) out.emplace(Role::aspect, *q.aspect);
    out.emplace(Role::opinion, q.opinion);
  }
  return out;
}

template <typename Quads>
PairSet relations_of(const Quads& quads) {
  PairSet out;
  for (const Quadruple& q : quads) {
    if (q.aspect) out.emplace(RelationType::ta, q.target, *q.aspect);
    out.emplace(RelationType::to, q.target, q.opinion);
    if (q.aspect) out.emplace(RelationType::ao, *q.aspect, q.opinion);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string code;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

namespace violation {
inline constexpr std::string_view kPosLenMismatch = "POS_LEN_MISMATCH";
inline constexpr std::string_view kSentencePartition = "SENTENCE_PARTITION";
inline constexpr std::string_view kDepSelfLoop = "DEP_SELF_LOOP";
inline constexpr std::string_view kDepOutOfRange = "DEP_OUT_OF_RANGE";
inline constexpr std::string_view kSpanOutOfRange = "SPAN_OUT_OF_RANGE";
inline constexpr std::string_view kSpanEmpty = "SPAN_EMPTY";
}  // namespace violation

inline ValidationReport validate_document(const Document& doc) {
  ValidationReport out;
  const int n = doc.size();
  auto add = [&](std::string_view code, std::string detail) {
    out.push_back({std::string(code), std::move(detail)});
  };

  if (doc.pos.size() != doc.tokens.size()) {
    add(violation::kPosLenMismatch, "pos has " + std::to_string(doc.pos.size()) + " tags for " +
                                        std::to_string(n) + " tokens");
  }

  // Sentences must tile [0, n) in order.
  {
    int cursor = 0;
    bool ok = true;
    for (const Span& s : doc.sentences) {
      if (s.begin != cursor || s.end <= s.begin) {
        ok = false;
        break;
      }
      cursor = s.end;
    }
    if (cursor != n) ok = false;
    if (doc.sentences.empty() && n == 0) ok = true;
    if (!ok) add(violation::kSentencePartition, "sentence spans do not partition [0, " + std::to_string(n) + ")");
  }

  for (std::size_t e = 0; e < doc.deps.size(); ++e) {
    const DepEdge& d = doc.deps[e];
    if (d.head < 0 || d.head >= n || d.dependent < 0 || d.dependent >= n) {
      add(violation::kDepOutOfRange, "edge " + std::to_string(e));
    } else if (d.head == d.dependent) {
      add(violation::kDepSelfLoop, "edge " + std::to_string(e));
    }
  }

  auto check_span = [&](const Span& s, std::size_t qi, std::string_view what) {
    std::string where = "quadruple " + std::to_string(qi) + " " + std::string(what);
    if (s.begin < 0 || s.end > n) {
      add(violation::kSpanOutOfRange, where);
    } else if (s.begin >= s.end) {
      add(violation::kSpanEmpty, where);
    }
  };
  for (std::size_t qi = 0; qi < doc.quadruples.size(); ++qi) {
    const Quadruple& q = doc.quadruples[qi];
    check_span(q.target, qi, "target");
    if (q.aspect) check_span(*q.aspect, qi, "aspect");
    check_span(q.opinion, qi, "opinion");
  }
  return out;
}

class ValidationError : public DataError {
 public:
  ValidationError(std::string doc_id, ValidationReport report)
      : DataError(describe(doc_id, report)), doc_id_(std::move(doc_id)), report_(std::move(report)) {}

  const std::string& doc_id() const { return doc_id_; }
  const ValidationReport& report() const { return report_; }

 private:
  static std::string describe(const std::string& id, const ValidationReport& r) {
    std::string s = "document '" + id + "' is invalid:";
    for (const auto& v : r) s += " " + v.code + " (" + v.detail + ");";
    return s;
  }
  std::string doc_id_;
  ValidationReport report_;
};

inline void require_valid(const Document& doc) {
  if (auto r = validate_document(doc); !r.empty()) throw ValidationError(doc.doc_id, std::move(r));
}

// Index of the sentence containing token i, or -1.
inline int sentence_of(const Document& doc, int token) {
  auto it = std::upper_bound(doc.sentences.begin(), doc.sentences.end(), token,
                             [](int t, const Span& s) { return t < s.end; });
  if (it == doc.sentences.end() || token < it->begin) return -1;
  return static_cast<int>(it - doc.sentences.begin());
}

// ---------------------------------------------------------------------------
// JSON lines format

inline json span_to_json(const Span& s) { return json::array({s.begin, s.end}); }

inline Span span_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw DataError("span must be a [begin, end] pair");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

inline json to_json(const Quadruple& q) {
  json j;
  j["target"] = span_to_json(q.target);
  j["aspect"] = q.aspect ? span_to_json(*q.aspect) : json(nullptr);
  j["opinion"] = span_to_json(q.opinion);
  j["sentiment"] = std::string(to_string(q.sentiment));
  return j;
}

inline Quadruple quadruple_from_json(const json& j) {
  Quadruple q;
  q.target = span_from_json(j.at("target"));
  if (!j.at("aspect").is_null()) q.aspect = span_from_json(j.at("aspect"));
  q.opinion = span_from_json(j.at("opinion"));
  q.sentiment = parse_sentiment(j.at("sentiment").get<std::string>());
  return q;
}

inline json to_json(const Document& d) {
  json j = json::object();
  j["doc_id"] = d.doc_id;
  j["lang"] = d.lang;
  j["text"] = d.text;
  j["tokens"] = d.tokens;
  json sents = json::array();
  for (const auto& s : d.sentences) sents.push_back(span_to_json(s));
  j["sentences"] = std::move(sents);
  j["pos"] = d.pos;
  json deps = json::array();
  for (const auto& e : d.deps) deps.push_back(json::array({e.head, e.dependent, e.label}));
  j["deps"] = std::move(deps);
  json quads = json::array();
  for (const auto& q : d.quadruples) quads.push_back(to_json(q));
  j["quadruples"] = std::move(quads);
  return j;
}

inline Document document_from_json(const json& j) {
  try {
    Document d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.lang = j.at("lang").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& s : j.at("sentences")) d.sentences.push_back(span_from_json(s));
    d.pos = j.at("pos").get<std::vector<std::string>>();
    for (const auto& e : j.at("deps")) {
      if (!e.is_array() || e.size() != 3) throw DataError("dep edge must be [i, j, label]");
      d.deps.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<std::string>()});
    }
    for (const auto& q : j.at("quadruples")) d.quadruples.push_back(quadruple_from_json(q));
    return d;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed document record: ") + e.what());
  }
}

inline Corpus read_corpus(std::istream& in) {
  Corpus out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(document_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("corpus: ") + e.what());
    } catch (const DataError& e) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline Corpus read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus) out << to_json(d).dump() << '\n';
}

inline void write_corpus_file(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file '" + path + "'");
  write_corpus(out, corpus);
}

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
  long doc_count = 0;
  long sentence_count = 0;
  long token_count = 0;
  std::map<Role, long> entity_counts{{Role::target, 0}, {Role::aspect, 0}, {Role::opinion, 0}};
  std::map<RelationType, long> relation_counts{
      {RelationType::ta, 0}, {RelationType::to, 0}, {RelationType::ao, 0}};
  long quad_count = 0;
  std::map<Sentiment, long> sentiment_counts{{Sentiment::pos, 0}, {Sentiment::neg, 0}};

  CorpusStats& operator+=(const CorpusStats& o) {
    doc_count += o.doc_count;
    sentence_count += o.sentence_count;
    token_count += o.token_count;
    for (auto& [k, v] : entity_counts) v += o.entity_counts.at(k);
    for (auto& [k, v] : relation_counts) v += o.relation_counts.at(k);
    quad_count += o.quad_count;
    for (auto& [k, v] : sentiment_counts) v += o.sentiment_counts.at(k);
    return *this;
  }
  friend CorpusStats operator+(CorpusStats a, const CorpusStats& b) { return a += b; }
  bool operator==(const CorpusStats&) const = default;
};

inline CorpusStats document_stats(const Document& doc) {
  CorpusStats s;
  s.doc_count = 1;
  s.sentence_count = static_cast<long>(doc.sentences.size());
  s.token_count = doc.size();
  for (const auto& [role, span] : entities_of(doc.quadruples)) ++s.entity_counts[role];
  for (const auto& rel : relations_of(doc.quadruples)) ++s.relation_counts[std::get<0>(rel)];
  const QuadSet quads = doc.quad_set();
  s.quad_count = static_cast<long>(quads.size());
  for (const auto& q : quads) ++s.sentiment_counts[q.sentiment];
  return s;
}

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats total;
  for (const auto& d : corpus) {
    require_valid(d);
    total += document_stats(d);
  }
  return total;
}

inline json to_json(const CorpusStats& s) {
  json j;
  j["docs"] = s.doc_count;
  j["sentences"] = s.sentence_count;
  j["tokens"] = s.token_count;
  for (Role r : kRoles) j["entities"][std::string(role_code(r))] = s.entity_counts.at(r);
  for (RelationType r : kRelationTypes) j["relations"][std::string(relation_code(r))] = s.relation_counts.at(r);
  j["quadruples"] = s.quad_count;
  j["sentiment"]["pos"] = s.sentiment_counts.at(Sentiment::pos);
  j["sentiment"]["neg"] = s.sentiment_counts.at(Sentiment::neg);
  return j;
}

// ---------------------------------------------------------------------------
// Distribution analysis

struct AnalysisReport {
  std::vector<std::pair<std::string, long>> doc_length_histogram;
  std::vector<std::pair<std::string, long>> quad_count_histogram;
  std::map<RelationType, double> cross_sentence_ratio;
  std::map<RelationType, long> relation_total;
  std::map<RelationType, long> relation_cross;
};

inline std::vector<std::string> doc_length_bins() {
  std::vector<std::string> bins{"<10"};
  for (int lo = 10; lo < 100; lo += 10) bins.push_back(std::to_string(lo) + "-" + std::to_string(lo + 9));
  bins.push_back("100+");
  return bins;
}

inline std::size_t doc_length_bin(int n) {
  if (n < 10) return 0;
  if (n >= 100) return 10;
  return static_cast<std::size_t>(n / 10);
}

inline std::vector<std::string> quad_count_bins() {
  std::vector<std::string> bins;
  for (int k = 0; k <= 9; ++k) bins.push_back(std::to_string(k));
  bins.push_back("10+");
  return bins;
}

// Cross-sentence iff the first tokens of the two entities sit in different sentences.
inline bool is_cross_sentence(const Document& doc, const Span& a, const Span& b) {
  return sentence_of(doc, a.head()) != sentence_of(doc, b.head());
}

inline AnalysisReport distribution_analysis(const Corpus& corpus) {
  AnalysisReport r;
  auto lbins = doc_length_bins();
  auto qbins = quad_count_bins();
  std::vector<long> lcount(lbins.size(), 0), qcount(qbins.size(), 0);
  for (RelationType t : kRelationTypes) {
    r.relation_total[t] = 0;
    r.relation_cross[t] = 0;
  }
  for (const auto& doc : corpus) {
    require_valid(doc);
    ++lcount[doc_length_bin(doc.size())];
    ++qcount[std::min<std::size_t>(doc.quad_set().size(), 10)];
    for (const auto& [type, a, b] : relations_of(doc.quadruples)) {
      ++r.relation_total[type];
      if (is_cross_sentence(doc, a, b)) ++r.relation_cross[type];
    }
  }
  for (std::size_t i = 0; i < lbins.size(); ++i) r.doc_length_histogram.emplace_back(lbins[i], lcount[i]);
  for (std::size_t i = 0; i < qbins.size(); ++i) r.quad_count_histogram.emplace_back(qbins[i], qcount[i]);
  for (RelationType t : kRelationTypes) {
    long total = r.relation_total[t];
    r.cross_sentence_ratio[t] = total == 0 ? 0.0 : static_cast<double>(r.relation_cross[t]) / total;
  }
  return r;
}

inline json to_json(const AnalysisReport& r) {
  json j;
  json lh = json::array(), qh = json::array();
  for (const auto& [bin, c] : r.doc_length_histogram) lh.push_back({{"bin", bin}, {"count", c}});
  for (const auto& [bin, c] : r.quad_count_histogram) qh.push_back({{"bin", bin}, {"count", c}});
  j["doc_length_histogram"] = lh;
  j["quad_count_histogram"] = qh;
  for (RelationType t : kRelationTypes) {
    const std::string k(relation_code(t));
    j["cross_sentence"][k] = {{"ratio", r.cross_sentence_ratio.at(t)},
                              {"cross", r.relation_cross.at(t)},
                              {"total", r.relation_total.at(t)}};
  }
  return j;
}

}  // namespace gridquad
