#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gridquad/corpus.hpp"
#include "gridquad/error.hpp"
#include "gridquad/eval.hpp"
#include "gridquad/grid.hpp"
#include "gridquad/model.hpp"
#include "gridquad/params.hpp"

namespace gridquad {

// Defaults follow the published hyperparameter table; h_x and vocab_size belong to the
// reference lookup encoder.
struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 15;
  int batch_size = 1;
  int h_p = 20;
  int h_s = 512;
  int h_e = 256;
  int h_r = 50;
  double dropout = 0.5;
  std::uint64_t seed = 42;
  bool use_skem = true;
  bool use_pos = true;
  bool use_dep = true;
  bool randomize_syntax = false;
  bool normalize_adjacency = false;
  int vocab_size = 0;  // 0 = every training token
  int h_x = 768;

  SyntaxOptions syntax() const { return {use_skem, use_pos, use_dep, normalize_adjacency}; }
  bool operator==(const TrainConfig&) const = default;
};

inline void validate_config(const TrainConfig& c) {
  auto fail = [](const std::string& m) { throw ContractError("invalid config: " + m); };
  if (!(c.learning_rate > 0)) fail("learning_rate must be positive");
  if (c.epochs < 0) fail("epochs must be >= 0");
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (c.h_p < 1 || c.h_s < 1 || c.h_e < 1 || c.h_r < 1 || c.h_x < 1) fail("dimensions must be positive");
  if (!(c.dropout >= 0 && c.dropout < 1)) fail("dropout must lie in [0,1)");
  if (c.vocab_size < 0) fail("vocab_size must be >= 0");
}

inline json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},       {"h_p", c.h_p},
          {"h_s", c.h_s},                     {"h_e", c.h_e},
          {"h_r", c.h_r},                     {"dropout", c.dropout},
          {"seed", c.seed},                   {"use_skem", c.use_skem},
          {"use_pos", c.use_pos},             {"use_dep", c.use_dep},
          {"randomize_syntax", c.randomize_syntax}, {"normalize_adjacency", c.normalize_adjacency},
          {"vocab_size", c.vocab_size},       {"h_x", c.h_x}};
}

// Overlays keys present in `j` onto `base`; unknown keys are rejected.
inline TrainConfig merge_config(TrainConfig c, const json& j) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  const json known = to_json(c);
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw DataError("unknown config key '" + k + "'");
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.h_p = j.value("h_p", c.h_p);
    c.h_s = j.value("h_s", c.h_s);
    c.h_e = j.value("h_e", c.h_e);
    c.h_r = j.value("h_r", c.h_r);
    c.dropout = j.value("dropout", c.dropout);
    c.seed = j.value("seed", c.seed);
    c.use_skem = j.value("use_skem", c.use_skem);
    c.use_pos = j.value("use_pos", c.use_pos);
    c.use_dep = j.value("use_dep", c.use_dep);
    c.randomize_syntax = j.value("randomize_syntax", c.randomize_syntax);
    c.normalize_adjacency = j.value("normalize_adjacency", c.normalize_adjacency);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.h_x = j.value("h_x", c.h_x);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad config value: ") + e.what());
  }
  return c;
}

// Trained extractor: parameters plus the encoder vocabularies and the generating config.
struct Model {
  TrainConfig config;
  Vocabulary tokens;
  Vocabulary pos_tags;
  ModelParams<double> params;
};

inline Vocabulary build_vocabulary(const Corpus& corpus, int cap, bool use_pos_field) {
  std::map<std::string, long> freq;
  for (const auto& d : corpus)
    for (const auto& w : use_pos_field ? d.pos : d.tokens) ++freq[w];
  std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [w, c] : items) {
    if (cap > 0 && v.size() >= cap) break;
    v.add(w);
  }
  return v;
}

inline ModelDims model_dims(const TrainConfig& c, const Vocabulary& tokens, const Vocabulary& pos) {
  return {tokens.size(), pos.size(), c.h_x, c.h_p, c.h_s, c.h_e, c.h_r};
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline ModelInput<double> make_input(const Document& doc, const Model& m) {
  const int n = doc.size();
  ModelInput<double> in;
  in.tokens.reserve(n);
  in.pos.reserve(n);
  for (const auto& t : doc.tokens) in.tokens.push_back(m.tokens.id(t));
  for (const auto& t : doc.pos) in.pos.push_back(m.pos_tags.id(t));
  in.pos.resize(static_cast<std::size_t>(n), Vocabulary::kUnknown);

  std::vector<std::pair<int, int>> edges;
  if (m.config.use_dep) {
    std::set<std::pair<int, int>> seen;
    for (const auto& e : doc.deps) {
      if (e.head == e.dependent) continue;
      seen.emplace(std::min(e.head, e.dependent), std::max(e.head, e.dependent));
    }
    edges.assign(seen.begin(), seen.end());
  }

  if (m.config.randomize_syntax) {
    std::mt19937_64 rng(m.config.seed ^ fnv1a(doc.doc_id));
    if (m.pos_tags.size() > 1) {
      std::uniform_int_distribution<int> tag(1, m.pos_tags.size() - 1);
      for (int& p : in.pos) p = tag(rng);
    }
    std::vector<std::pair<int, int>> all;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) all.emplace_back(i, j);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(all.size(), edges.size()));
    edges = std::move(all);
  }
  in.adjacency = adjacency_matrix<double>(n, edges, m.config.normalize_adjacency);
  return in;
}

// ---------------------------------------------------------------------------
// Prediction

struct PredictResult {
  QuadSet quadruples;
  std::vector<std::string> trace;
};

inline PredictResult predict(const Document& doc, const Model& m) {
  if (doc.size() == 0) return {};
  const auto in = make_input(doc, m);
  const auto t = forward(m.params, in, m.config.syntax());
  const auto eg = argmax_grid<double, EntityLabel>(t.entity.probs);
  const auto rg = argmax_grid<double, RelationLabel>(t.relation.probs);
  auto d = decode_quadruples(eg, rg);
  return {std::move(d.quadruples), std::move(d.trace)};
}

inline std::vector<Prediction> predict_corpus(const Corpus& corpus, const Model& m) {
  std::vector<Prediction> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) out.push_back({d.doc_id, predict(d, m).quadruples});
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

class Adam {
 public:
  Adam(const ModelParams<double>& like, double lr) : lr_(lr), m_(zeros_like(like)), v_(zeros_like(like)) {}

  void step(ModelParams<double>& p, const ModelParams<double>& g, double scale = 1.0) {
    ++t_;
    const double c1 = 1 - std::pow(kBeta1, t_), c2 = 1 - std::pow(kBeta2, t_);
    auto ps = tensors(p);
    auto ms = tensors(m_);
    auto vs = tensors(v_);
    std::vector<const Mat<double>*> gs;
    g.for_each([&](const std::string&, const Mat<double>& m) { gs.push_back(&m); });
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const auto grad = (gs[k]->array() * scale).eval();
      ms[k]->array() = kBeta1 * ms[k]->array() + (1 - kBeta1) * grad;
      vs[k]->array() = kBeta2 * vs[k]->array() + (1 - kBeta2) * grad.square();
      ps[k]->array() -= lr_ * (ms[k]->array() / c1) / ((vs[k]->array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  static std::vector<Mat<double>*> tensors(ModelParams<double>& p) {
    std::vector<Mat<double>*> out;
    p.for_each([&](const std::string&, Mat<double>& m) { out.push_back(&m); });
    return out;
  }
  double lr_;
  long t_ = 0;
  ModelParams<double> m_, v_;
};

inline void zero_out(ModelParams<double>& g) {
  g.for_each([](const std::string&, Mat<double>& m) { m.setZero(); });
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double loss = 0;  // mean per document
  EvalReport dev;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 = initial parameters
};

inline json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"loss", r.loss}, {"dev", to_json(r.dev)}};
}

struct TrainResult {
  Model model;
  TrainLog log;
};

// Called after each epoch; return false to stop.
using EpochCallback = std::function<bool(const EpochRecord&, const Model&)>;

struct PreparedDoc {
  const Document* doc;
  ModelInput<double> input;
  EntityGrid entity;
  RelationGrid relation;
};

inline TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const TrainConfig& config,
                         const EpochCallback& on_epoch = nullptr) {
  validate_config(config);
  for (const auto* c : {&train_corpus, &dev_corpus})
    for (const auto& d : *c) require_valid(d);

  TrainResult out;
  Model& model = out.model;
  model.config = config;
  model.tokens = build_vocabulary(train_corpus, config.vocab_size, false);
  model.pos_tags = build_vocabulary(train_corpus, 0, true);
  model.params = init_params<double>(model_dims(config, model.tokens, model.pos_tags), config.seed);

  std::vector<PreparedDoc> docs;
  for (const auto& d : train_corpus) {
    auto [eg, rg] = encode_grids(d);  // throws on unrepresentable documents
    if (d.size() == 0) continue;
    docs.push_back({&d, make_input(d, model), std::move(eg), std::move(rg)});
  }
  if (config.epochs == 0) return out;

  std::mt19937_64 rng(config.seed);
  Adam adam(model.params, config.learning_rate);
  ModelParams<double> grads = zeros_like(model.params);
  std::optional<ModelParams<double>> best;
  double best_f1 = -1;
  const SyntaxOptions syntax = config.syntax();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    int in_batch = 0;
    zero_out(grads);
    for (std::size_t k : order) {
      const auto& pd = docs[k];
      auto tape = forward(model.params, pd.input, syntax, {config.dropout, &rng});
      const double loss = backward(tape, model.params, pd.entity, pd.relation, grads).total();
      if (!std::isfinite(loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", document '" + pd.doc->doc_id + "'");
      loss_sum += loss;
      if (++in_batch == config.batch_size) {
        adam.step(model.params, grads, 1.0 / in_batch);
        zero_out(grads);
        in_batch = 0;
      }
    }
    if (in_batch > 0) adam.step(model.params, grads, 1.0 / in_batch);
    std::string bad;
    if (!all_finite(model.params, &bad))
      throw NumericError("non-finite parameter '" + bad + "' after epoch " + std::to_string(epoch));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = docs.empty() ? 0.0 : loss_sum / static_cast<double>(docs.size());
    rec.dev = evaluate(predict_corpus(dev_corpus, model), dev_corpus);
    out.log.epochs.push_back(rec);

    const double f1 = rec.dev.quadruple.f1();
    if (dev_corpus.empty() || f1 > best_f1) {
      best_f1 = f1;
      best = model.params;
      out.log.best_epoch = epoch;
    }
    if (on_epoch && !on_epoch(rec, model)) break;
  }
  if (best) model.params = std::move(*best);
  return out;
}

// ---------------------------------------------------------------------------
// Throughput

enum class ThroughputMode { train, inference };

// Median documents/second over `repetitions` timed passes after one warm-up pass.
inline double throughput(const Corpus& corpus, const Model& m, ThroughputMode mode, int repetitions = 3) {
  if (corpus.empty()) throw ContractError("throughput needs a nonempty corpus");
  repetitions = std::max(repetitions, 3);
  Model work = m;
  std::vector<PreparedDoc> docs;
  for (const auto& d : corpus) {
    auto [eg, rg] = detail::encode_lenient(d, nullptr);
    docs.push_back({&d, make_input(d, m), std::move(eg), std::move(rg)});
  }
  Adam adam(work.params, m.config.learning_rate);
  ModelParams<double> grads = zeros_like(work.params);
  std::mt19937_64 rng(m.config.seed);
  const SyntaxOptions syntax = m.config.syntax();

  auto pass = [&] {
    for (const auto& pd : docs) {
      if (mode == ThroughputMode::inference) {
        const auto t = forward(work.params, pd.input, syntax);
        const auto eg = argmax_grid<double, EntityLabel>(t.entity.probs);
        const auto rg = argmax_grid<double, RelationLabel>(t.relation.probs);
        (void)decode_quadruples(eg, rg);
      } else {
        zero_out(grads);
        auto t = forward(work.params, pd.input, syntax, {m.config.dropout, &rng});
        backward(t, work.params, pd.entity, pd.relation, grads);
        adam.step(work.params, grads);
      }
    }
  };
  pass();
  std::vector<double> rates;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    pass();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rates.push_back(static_cast<double>(docs.size()) / std::max(secs, 1e-9));
  }
  std::sort(rates.begin(), rates.end());
  return rates[rates.size() / 2];
}

}  // namespace gridquad
