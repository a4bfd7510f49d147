#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gridquad/corpus.hpp"
#include "gridquad/error.hpp"

namespace gridquad {

struct GenSpec {
  int doc_count = 100;
  int target_vocab = 20;
  int aspect_vocab = 40;
  int opinion_vocab = 40;
  int filler_vocab = 200;
  int min_length = 10;
  int max_length = 60;
  int min_quads = 1;
  int max_quads = 6;
  int max_phrase_length = 3;
  double cross_sentence_fraction = 0.3;
  double null_aspect_fraction = 0.2;
  std::string lang = "syn";
};

inline json to_json(const GenSpec& g) {
  return {{"doc_count", g.doc_count},
          {"target_vocab", g.target_vocab},
          {"aspect_vocab", g.aspect_vocab},
          {"opinion_vocab", g.opinion_vocab},
          {"filler_vocab", g.filler_vocab},
          {"doc_length", {g.min_length, g.max_length}},
          {"quads_per_doc", {g.min_quads, g.max_quads}},
          {"max_phrase_length", g.max_phrase_length},
          {"cross_sentence_fraction", g.cross_sentence_fraction},
          {"null_aspect_fraction", g.null_aspect_fraction},
          {"lang", g.lang}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline GenSpec gen_spec_from_json(const json& j) {
  GenSpec g;
  if (!j.is_object()) throw DataError("malformed generator spec: expected an object");
  const json known = to_json(g);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw DataError("malformed generator spec: unknown key '" + key + "'");
  try {
    g.doc_count = j.value("doc_count", g.doc_count);
    g.target_vocab = j.value("target_vocab", g.target_vocab);
    g.aspect_vocab = j.value("aspect_vocab", g.aspect_vocab);
    g.opinion_vocab = j.value("opinion_vocab", g.opinion_vocab);
    g.filler_vocab = j.value("filler_vocab", g.filler_vocab);
    if (j.contains("doc_length")) {
      g.min_length = j.at("doc_length").at(0).get<int>();
      g.max_length = j.at("doc_length").at(1).get<int>();
    }
    if (j.contains("quads_per_doc")) {
      g.min_quads = j.at("quads_per_doc").at(0).get<int>();
      g.max_quads = j.at("quads_per_doc").at(1).get<int>();
    }
    g.max_phrase_length = j.value("max_phrase_length", g.max_phrase_length);
    g.cross_sentence_fraction = j.value("cross_sentence_fraction", g.cross_sentence_fraction);
    g.null_aspect_fraction = j.value("null_aspect_fraction", g.null_aspect_fraction);
    g.lang = j.value("lang", g.lang);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed generator spec: ") + e.what());
  }
  return g;
}

// What the generator planted, counted while building (not recomputed from the output).
struct PlantedTruth {
  CorpusStats stats;
  std::map<RelationType, long> relation_total{{RelationType::ta, 0}, {RelationType::to, 0}, {RelationType::ao, 0}};
  std::map<RelationType, long> relation_cross{{RelationType::ta, 0}, {RelationType::to, 0}, {RelationType::ao, 0}};
};

struct SyntheticCorpus {
  Corpus documents;
  PlantedTruth truth;
};

// Universal 12-tag set.
inline const std::vector<std::string>& synthetic_pos_tags() {
  static const std::vector<std::string> tags = {"NOUN", "VERB", "ADJ", "ADV", "PRON", "DET",
                                                "ADP",  "NUM",  "CONJ", "PRT", ".",   "X"};
  return tags;
}

namespace detail {

struct Phrase {
  std::vector<std::string> tokens;
  Sentiment polarity = Sentiment::pos;
};

inline std::vector<Phrase> make_vocab(std::mt19937_64& rng, const std::string& prefix, int size, int max_len) {
  std::uniform_int_distribution<int> len(1, std::max(1, max_len));
  std::vector<Phrase> out(static_cast<std::size_t>(size));
  for (int e = 0; e < size; ++e) {
    int l = len(rng);
    for (int k = 0; k < l; ++k) out[e].tokens.push_back(prefix + std::to_string(e) + static_cast<char>('a' + k));
    out[e].polarity = e < (size + 1) / 2 ? Sentiment::pos : Sentiment::neg;
  }
  return out;
}

struct Mention {
  Role role;
  const Phrase* phrase;
  int sentence = 0;
  int begin = -1;  // filled at layout
  Span span() const { return {begin, begin + static_cast<int>(phrase->tokens.size())}; }
};

}  // namespace detail

inline void validate_gen_spec(const GenSpec& g) {
  auto fail = [](const std::string& m) { throw GenerationError("infeasible generator spec: " + m); };
  if (g.doc_count < 0) fail("doc_count < 0");
  if (g.target_vocab < 1 || g.aspect_vocab < 1 || g.opinion_vocab < 1 || g.filler_vocab < 1)
    fail("every vocabulary needs at least one entry");
  if (g.min_length < 1 || g.min_length > g.max_length) fail("doc_length range is empty");
  if (g.min_quads < 0 || g.min_quads > g.max_quads) fail("quads_per_doc range is empty");
  if (g.max_phrase_length < 1) fail("max_phrase_length < 1");
  if (!(g.cross_sentence_fraction >= 0.0 && g.cross_sentence_fraction <= 1.0))
    fail("cross_sentence_fraction outside [0,1]");
  if (!(g.null_aspect_fraction >= 0.0 && g.null_aspect_fraction <= 1.0)) fail("null_aspect_fraction outside [0,1]");
  // A quadruple needs at least a one-token target (shared) plus aspect and opinion tokens.
  if (g.min_quads > 0 && 1 + 2 * g.min_quads > g.max_length)
    fail("doc_length max " + std::to_string(g.max_length) + " cannot hold " + std::to_string(g.min_quads) +
         " quadruples (needs at least " + std::to_string(1 + 2 * g.min_quads) + " tokens)");
}

inline SyntheticCorpus synthesize_corpus(const GenSpec& g, std::uint64_t seed) {
  validate_gen_spec(g);
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  // The lexicon depends only on the spec, so corpora drawn with different seeds share one language.
  std::mt19937_64 lexicon_rng(0);
  const auto targets = detail::make_vocab(lexicon_rng, "tar", g.target_vocab, std::min(2, g.max_phrase_length));
  const auto aspects = detail::make_vocab(lexicon_rng, "asp", g.aspect_vocab, g.max_phrase_length);
  const auto opinions = detail::make_vocab(lexicon_rng, "opn", g.opinion_vocab, std::min(2, g.max_phrase_length));
  const auto& tags = synthetic_pos_tags();

  std::vector<int> quad_counts(static_cast<std::size_t>(g.doc_count));
  for (int& q : quad_counts) q = uniform(g.min_quads, g.max_quads);
  const long total_quads = std::accumulate(quad_counts.begin(), quad_counts.end(), 0L);

  // Exactly round(f * Q) quadruples across the corpus get a cross-sentence target/opinion link.
  const long cross_quota = std::lround(g.cross_sentence_fraction * static_cast<double>(total_quads));
  std::vector<char> cross_flag(static_cast<std::size_t>(total_quads), 0);
  std::fill(cross_flag.begin(), cross_flag.begin() + cross_quota, 1);
  std::shuffle(cross_flag.begin(), cross_flag.end(), rng);

  SyntheticCorpus out;
  PlantedTruth& truth = out.truth;
  long quad_cursor = 0;

  for (int d = 0; d < g.doc_count; ++d) {
    const int nq = quad_counts[d];
    std::vector<char> cross(cross_flag.begin() + quad_cursor, cross_flag.begin() + quad_cursor + nq);
    quad_cursor += nq;
    const bool any_cross = std::find(cross.begin(), cross.end(), 1) != cross.end();

    int n_sentences = any_cross ? 2 : (coin(0.5) ? 2 : 1);
    const int target_sentence = n_sentences == 2 ? uniform(0, 1) : 0;
    const int other_sentence = 1 - target_sentence;

    std::vector<detail::Mention> mentions;
    const int n_targets = nq == 0 ? 0 : (nq >= 3 && coin(0.5) ? 2 : 1);
    for (int t = 0; t < n_targets; ++t)
      mentions.push_back({Role::target, &targets[uniform(0, g.target_vocab - 1)], target_sentence});

    struct PlannedQuad {
      int target, aspect, opinion;  // mention indices, aspect -1 if null
      bool cross;
    };
    std::vector<PlannedQuad> planned;
    for (int k = 0; k < nq; ++k) {
      PlannedQuad pq{};
      pq.target = k < n_targets ? k : uniform(0, n_targets - 1);
      pq.cross = cross[k] != 0;
      const int sent = pq.cross ? other_sentence : target_sentence;
      pq.aspect = -1;
      if (!coin(g.null_aspect_fraction)) {
        pq.aspect = static_cast<int>(mentions.size());
        mentions.push_back({Role::aspect, &aspects[uniform(0, g.aspect_vocab - 1)], sent});
      }
      pq.opinion = static_cast<int>(mentions.size());
      mentions.push_back({Role::opinion, &opinions[uniform(0, g.opinion_vocab - 1)], sent});
      planned.push_back(pq);
    }

    // Length and filler budget.
    std::vector<int> mention_tokens(n_sentences, 0), mention_count(n_sentences, 0);
    for (const auto& m : mentions) {
      mention_tokens[m.sentence] += static_cast<int>(m.phrase->tokens.size());
      ++mention_count[m.sentence];
    }
    int needed = 0;
    for (int s = 0; s < n_sentences; ++s) needed += std::max(mention_tokens[s], 1);
    int length = uniform(g.min_length, g.max_length);
    if (length < needed) {
      if (needed > g.max_length)
        throw GenerationError("document " + std::to_string(d) + ": " + std::to_string(nq) + " quadruples need " +
                              std::to_string(needed) + " tokens but doc_length max is " +
                              std::to_string(g.max_length));
      length = needed;
    }
    std::vector<int> fillers(n_sentences, 0);
    int spare = length;
    for (int s = 0; s < n_sentences; ++s) {
      spare -= mention_tokens[s];
      if (mention_count[s] == 0) {
        fillers[s] = 1;
        --spare;
      }
    }
    for (; spare > 0; --spare) ++fillers[uniform(0, n_sentences - 1)];

    // Layout: per sentence, shuffle mention blocks among filler tokens.
    Document doc;
    doc.doc_id = "syn-" + std::to_string(seed) + "-" + std::to_string(d);
    doc.lang = g.lang;
    std::vector<int> filler_positions;
    for (int s = 0; s < n_sentences; ++s) {
      std::vector<int> items;  // mention index, or -1 for filler
      for (int m = 0; m < static_cast<int>(mentions.size()); ++m)
        if (mentions[m].sentence == s) items.push_back(m);
      items.insert(items.end(), static_cast<std::size_t>(fillers[s]), -1);
      std::shuffle(items.begin(), items.end(), rng);
      const int begin = doc.size();
      for (int item : items) {
        if (item < 0) {
          const int w = uniform(0, g.filler_vocab - 1);
          filler_positions.push_back(doc.size());
          doc.tokens.push_back("w" + std::to_string(w));
          // Filler words keep a fixed non-noun, non-adjective tag.
          static const int kFillerTags[] = {1, 3, 4, 5, 6, 7, 8, 9, 10, 11};
          doc.pos.push_back(tags[kFillerTags[w % 10]]);
          continue;
        }
        auto& m = mentions[item];
        m.begin = doc.size();
        for (const auto& tok : m.phrase->tokens) {
          doc.tokens.push_back(tok);
          doc.pos.push_back(m.role == Role::opinion ? "ADJ" : "NOUN");
        }
      }
      doc.sentences.push_back({begin, doc.size()});
    }
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) doc.text += (i ? " " : "") + doc.tokens[i];

    // Dependency tree.
    std::vector<int> in_tree;
    auto attach = [&](int head, int dep, const char* label) {
      doc.deps.push_back({head, dep, label});
      in_tree.push_back(dep);
    };
    auto attach_phrase = [&](const detail::Mention& m, int head, const char* label) {
      const Span s = m.span();
      if (head < 0) {
        in_tree.push_back(s.begin);
      } else {
        attach(head, s.begin, label);
      }
      for (int k = s.begin + 1; k < s.end; ++k) attach(k - 1, k, "compound");
    };
    auto random_node = [&] { return in_tree[uniform(0, static_cast<int>(in_tree.size()) - 1)]; };
    for (int t = 0; t < n_targets; ++t) attach_phrase(mentions[t], in_tree.empty() ? -1 : random_node(), "conj");
    for (const auto& pq : planned) {
      const int target_head = mentions[pq.target].begin;
      int opinion_head = target_head;
      if (pq.aspect >= 0) {
        attach_phrase(mentions[pq.aspect], target_head, "nmod");
        opinion_head = mentions[pq.aspect].begin;
      }
      attach_phrase(mentions[pq.opinion], opinion_head, "amod");
    }
    // Fillers hang off one mention through their own subtree so mention neighbourhoods stay syntactic.
    std::shuffle(filler_positions.begin(), filler_positions.end(), rng);
    std::vector<int> filler_nodes;
    for (int f : filler_positions) {
      if (in_tree.empty()) {
        in_tree.push_back(f);
      } else {
        attach(filler_nodes.empty() ? random_node() : filler_nodes[uniform(0, static_cast<int>(filler_nodes.size()) - 1)],
               f, "dep");
      }
      filler_nodes.push_back(f);
    }

    // Quadruples and bookkeeping.
    truth.stats.doc_count += 1;
    truth.stats.sentence_count += n_sentences;
    truth.stats.token_count += doc.size();
    truth.stats.entity_counts[Role::target] += n_targets;
    for (const auto& pq : planned) {
      Quadruple q;
      q.target = mentions[pq.target].span();
      if (pq.aspect >= 0) q.aspect = mentions[pq.aspect].span();
      q.opinion = mentions[pq.opinion].span();
      q.sentiment = mentions[pq.opinion].phrase->polarity;
      doc.quadruples.push_back(q);

      truth.stats.quad_count += 1;
      truth.stats.sentiment_counts[q.sentiment] += 1;
      truth.stats.entity_counts[Role::opinion] += 1;
      truth.stats.relation_counts[RelationType::to] += 1;
      truth.relation_total[RelationType::to] += 1;
      if (pq.cross) truth.relation_cross[RelationType::to] += 1;
      if (pq.aspect >= 0) {
        truth.stats.entity_counts[Role::aspect] += 1;
        truth.stats.relation_counts[RelationType::ta] += 1;
        truth.stats.relation_counts[RelationType::ao] += 1;
        truth.relation_total[RelationType::ta] += 1;
        truth.relation_total[RelationType::ao] += 1;
        // Aspect sits with its opinion.
        if (pq.cross) truth.relation_cross[RelationType::ta] += 1;
      }
    }
    std::sort(doc.quadruples.begin(), doc.quadruples.end());
    out.documents.push_back(std::move(doc));
  }
  return out;
}

}  // namespace gridquad
