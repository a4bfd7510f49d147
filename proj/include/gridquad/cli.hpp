#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridquad/gridquad.hpp"

namespace gridquad::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

namespace fs = std::filesystem;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void write_corpus_to(const std::string& path, const Corpus& c) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_corpus_file(path, c);
}

inline void write_predictions(const std::string& path, const Corpus& in, const std::vector<Prediction>& preds) {
  Corpus out = in;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].quadruples.assign(preds[i].quadruples.begin(), preds[i].quadruples.end());
  write_corpus_to(path, out);
}

// Options shared by the subcommands; filled by CLI11.
struct Options {
  std::string in, out, train, dev, test, model, config, spec, report, errors, predictions, trace, labels, truth;
  std::string lang = "und";
  std::string ratio = "8:1:1";
  std::string mode = "inference";
  std::uint64_t seed = 0;
  int docs = -1;
  int repetitions = 3;
  double p_o = -1, p_e = -1;

  // TrainConfig overrides; unset means "keep file/default value".
  std::optional<double> learning_rate, dropout;
  std::optional<int> epochs, batch_size, h_x, h_p, h_s, h_e, h_r, vocab_size;
  std::optional<std::uint64_t> train_seed;
  bool no_skem = false, no_pos = false, no_dep = false, random_syntax = false, normalize = false;
};

inline TrainConfig resolve_config(const Options& o) {
  TrainConfig c;
  if (!o.config.empty()) {
    try {
      c = merge_config(c, json::parse(read_text(o.config)));
    } catch (const json::exception& e) {
      throw DataError("config '" + o.config + "': " + e.what());
    }
  }
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.dropout) c.dropout = *o.dropout;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.h_x) c.h_x = *o.h_x;
  if (o.h_p) c.h_p = *o.h_p;
  if (o.h_s) c.h_s = *o.h_s;
  if (o.h_e) c.h_e = *o.h_e;
  if (o.h_r) c.h_r = *o.h_r;
  if (o.vocab_size) c.vocab_size = *o.vocab_size;
  if (o.train_seed) c.seed = *o.train_seed;
  if (o.no_skem) c.use_skem = false;
  if (o.no_pos) c.use_pos = false;
  if (o.no_dep) c.use_dep = false;
  if (o.random_syntax) c.randomize_syntax = true;
  if (o.normalize) c.normalize_adjacency = true;
  validate_config(c);
  return c;
}

inline SplitRatio parse_ratio(const std::string& s) {
  SplitRatio r;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> r.train >> c1 >> r.dev >> c2 >> r.test) || c1 != ':' || c2 != ':' || !in.eof())
    throw CLI::ValidationError("--ratio", "expected a:b:c, got '" + s + "'");
  if (!(r.train > 0 && r.dev > 0 && r.test > 0)) throw CLI::ValidationError("--ratio", "ratios must be positive");
  return r;
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_convert(const Options& o, std::ostream& out) {
  Corpus corpus;
  std::vector<fs::path> stems;
  for (const auto& e : fs::directory_iterator(o.in))
    if (e.path().extension() == ".ann") stems.push_back(e.path());
  std::sort(stems.begin(), stems.end());
  for (const auto& ann : stems) {
    fs::path txt = ann, tok = ann;
    txt.replace_extension(".txt");
    tok.replace_extension(".tok");
    const std::string text = read_text(txt.string());
    try {
      const AnnGraph g = parse_ann(read_text(ann.string()), text);
      corpus.push_back(ann_to_document(g, ann.stem().string(), o.lang, text, parse_token_layer(read_text(tok.string()))));
    } catch (const DataError& e) {
      throw DataError(ann.filename().string() + ": " + e.what());
    }
  }
  write_corpus_to(o.out, corpus);
  out << "converted " << corpus.size() << " documents\n";
  return kOk;
}

inline int cmd_split(const Options& o, std::ostream& out) {
  const Corpus corpus = read_corpus_file(o.in);
  const Splits s = split_corpus(corpus, parse_ratio(o.ratio), o.seed);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_corpus_to((dir / "train.jsonl").string(), s.train);
  write_corpus_to((dir / "dev.jsonl").string(), s.dev);
  write_corpus_to((dir / "test.jsonl").string(), s.test);
  out << "train " << s.train.size() << " dev " << s.dev.size() << " test " << s.test.size() << "\n";
  return kOk;
}

inline int cmd_stats(const Options& o, std::ostream& out) {
  const json j = to_json(corpus_stats(read_corpus_file(o.in)));
  write_json(o.out, j);
  out << j.dump() << "\n";
  return kOk;
}

inline int cmd_analyze(const Options& o, std::ostream& out) {
  const json j = to_json(distribution_analysis(read_corpus_file(o.in)));
  write_json(o.out, j);
  out << j.dump() << "\n";
  return kOk;
}

inline int cmd_kappa(const Options& o, std::ostream& out) {
  json j;
  if (!o.labels.empty()) {
    for (const auto& [layer, a] : cohen_kappa_by_layer(parse_agreement_tsv(read_text(o.labels))))
      j[layer] = {{"P_o", a.observed}, {"P_e", a.chance}, {"kappa", a.kappa}};
  } else {
    if (o.p_o < 0 || o.p_e < 0) throw CLI::ValidationError("kappa", "give --labels or both --po and --pe");
    j["kappa"] = cohen_kappa(o.p_o, o.p_e);
    j["P_o"] = o.p_o;
    j["P_e"] = o.p_e;
  }
  write_json(o.out, j);
  out << j.dump() << "\n";
  return kOk;
}

inline int cmd_synth(const Options& o, std::ostream& out) {
  GenSpec g;
  if (!o.spec.empty()) {
    try {
      g = gen_spec_from_json(json::parse(read_text(o.spec)));
    } catch (const json::exception& e) {
      throw DataError("generator spec '" + o.spec + "': " + e.what());
    }
  }
  if (o.docs >= 0) g.doc_count = o.docs;
  const SyntheticCorpus s = synthesize_corpus(g, o.seed);
  write_corpus_to(o.out, s.documents);
  if (!o.truth.empty()) {
    json t;
    t["stats"] = to_json(s.truth.stats);
    for (RelationType r : kRelationTypes)
      t["cross_sentence"][std::string(relation_code(r))] = {{"cross", s.truth.relation_cross.at(r)},
                                                           {"total", s.truth.relation_total.at(r)}};
    write_json(o.truth, t);
  }
  out << "generated " << s.documents.size() << " documents\n";
  return kOk;
}

inline int cmd_train(const Options& o, std::ostream& out) {
  const TrainConfig config = resolve_config(o);
  const Corpus train_corpus = read_corpus_file(o.train);
  const Corpus dev_corpus = o.dev.empty() ? Corpus{} : read_corpus_file(o.dev);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::ofstream log((dir / "train_log.jsonl").string(), std::ios::binary);
  auto result = train(train_corpus, dev_corpus, config, [&](const EpochRecord& r, const Model&) {
    log << to_json(r).dump() << "\n" << std::flush;
    out << "epoch " << r.epoch << " loss " << r.loss << " dev quad F1 " << r.dev.quadruple.f1() << "\n";
    return true;
  });
  save_checkpoint_file((dir / "model.ckpt").string(), result.model);
  write_json((dir / "config.json").string(), to_json(config));
  write_json((dir / "summary.json").string(), {{"best_epoch", result.log.best_epoch}});
  out << "best epoch " << result.log.best_epoch << "\n";
  return kOk;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  const Model m = load_checkpoint_file(o.model);
  const Corpus test = read_corpus_file(o.test);
  const auto preds = predict_corpus(test, m);
  const EvalReport rep = evaluate(preds, test);
  write_json(o.report, to_json(rep));
  if (!o.errors.empty()) write_json(o.errors, to_json(error_analysis(preds, test)));
  if (!o.predictions.empty()) write_predictions(o.predictions, test, preds);
  out << "quadruple P " << rep.quadruple.precision() << " R " << rep.quadruple.recall() << " F1 "
      << rep.quadruple.f1() << "\n";
  return kOk;
}

inline int cmd_predict(const Options& o, std::ostream& out) {
  const Model m = load_checkpoint_file(o.model);
  const Corpus docs = read_corpus_file(o.in);
  std::vector<Prediction> preds;
  json trace = json::object();
  for (const auto& d : docs) {
    auto r = predict(d, m);
    if (!r.trace.empty()) trace[d.doc_id] = r.trace;
    preds.push_back({d.doc_id, std::move(r.quadruples)});
  }
  write_predictions(o.out, docs, preds);
  if (!o.trace.empty()) write_json(o.trace, trace);
  out << "predicted " << docs.size() << " documents\n";
  return kOk;
}

inline constexpr double kGradTolerance = 1e-4;

inline int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto f = make_gradcheck_fixture(o.seed);
  const auto results = check_model_gradients(f.params, f.input, SyntaxOptions{}, f.entity, f.relation,
                                             [](const std::string&) { return true; });
  const auto tape = forward(f.params, f.input, SyntaxOptions{});
  const double loss_err = check_loss_gradient(tape.entity.scores(), tape.relation.bridged, f.entity, f.relation);
  bool ok = loss_err <= kGradTolerance;
  json j = json::object();
  out << std::scientific << std::setprecision(3);
  for (const auto& r : results) {
    out << r.tensor << " " << r.max_relative_error << "\n";
    j[r.tensor] = r.max_relative_error;
    ok = ok && r.max_relative_error <= kGradTolerance;
  }
  out << "loss " << loss_err << "\n";
  j["loss"] = loss_err;
  if (!o.out.empty()) write_json(o.out, j);
  out << (ok ? "gradcheck passed" : "gradcheck FAILED") << "\n";
  return ok ? kOk : kNumeric;
}

inline int cmd_throughput(const Options& o, std::ostream& out) {
  const Model m = load_checkpoint_file(o.model);
  const Corpus docs = read_corpus_file(o.in);
  const auto mode = o.mode == "train" ? ThroughputMode::train : ThroughputMode::inference;
  const double rate = throughput(docs, m, mode, o.repetitions);
  write_json(o.out, {{"mode", o.mode}, {"docs_per_second", rate}, {"documents", docs.size()}});
  out << o.mode << " " << rate << " docs/s\n";
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"gridquad: grid-tagging sentiment quadruple extraction toolkit", "gridquad"};
  app.require_subcommand(1);
  Options o;

  auto* convert = app.add_subcommand("convert", "Convert BRAT .ann/.txt/.tok triples in a directory to a corpus file");
  convert->add_option("--in", o.in, "Directory of <stem>.ann, <stem>.txt, <stem>.tok")->required()->check(CLI::ExistingDirectory);
  convert->add_option("--lang", o.lang, "Language tag for every document");
  convert->add_option("--out", o.out, "Output corpus (JSON lines)")->required();

  auto* split = app.add_subcommand("split", "Random train/dev/test split");
  split->add_option("--in", o.in, "Input corpus")->required()->check(CLI::ExistingFile);
  split->add_option("--ratio", o.ratio, "Ratio train:dev:test")->capture_default_str();
  split->add_option("--seed", o.seed, "Shuffle seed")->required();
  split->add_option("--out", o.out, "Output directory (train.jsonl, dev.jsonl, test.jsonl)")->required();

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("--in", o.in, "Input corpus")->required()->check(CLI::ExistingFile);
  stats->add_option("--out", o.out, "Report file (JSON)")->required();

  auto* analyze = app.add_subcommand("analyze", "Length / quadruple-count histograms and cross-sentence ratios");
  analyze->add_option("--in", o.in, "Input corpus")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", o.out, "Report file (JSON)")->required();

  auto* kappa = app.add_subcommand("kappa", "Cohen's kappa from agreement fractions or paired labels");
  kappa->add_option("--po", o.p_o, "Observed agreement");
  kappa->add_option("--pe", o.p_e, "Chance agreement");
  kappa->add_option("--labels", o.labels, "TSV: layer, label A, label B")->check(CLI::ExistingFile);
  kappa->add_option("--out", o.out, "Report file (JSON)")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--docs", o.docs, "Document count (overrides the spec)");
  synth->add_option("--seed", o.seed, "Generator seed")->required();
  synth->add_option("--spec", o.spec, "Generator spec (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--out", o.out, "Output corpus")->required();
  synth->add_option("--truth", o.truth, "Write planted ground truth (JSON)");

  auto* trn = app.add_subcommand("train", "Train the extractor");
  trn->add_option("--config", o.config, "Config file (JSON, TrainConfig keys)")->check(CLI::ExistingFile);
  trn->add_option("--train", o.train, "Training corpus")->required()->check(CLI::ExistingFile);
  trn->add_option("--dev", o.dev, "Development corpus")->check(CLI::ExistingFile);
  trn->add_option("--out", o.out, "Output directory (model.ckpt, train_log.jsonl)")->required();
  trn->add_option("--seed", o.train_seed, "Seed (overrides config)");
  trn->add_option("--epochs", o.epochs, "Epochs (overrides config)");
  trn->add_option("--learning-rate", o.learning_rate, "Learning rate (overrides config)");
  trn->add_option("--batch-size", o.batch_size, "Batch size (overrides config)");
  trn->add_option("--dropout", o.dropout, "Dropout (overrides config)");
  trn->add_option("--h-x", o.h_x, "Token embedding width");
  trn->add_option("--h-p", o.h_p, "POS embedding width");
  trn->add_option("--h-s", o.h_s, "Syntax module width");
  trn->add_option("--h-e", o.h_e, "Entity space width");
  trn->add_option("--h-r", o.h_r, "Relation space width");
  trn->add_option("--vocab-size", o.vocab_size, "Token vocabulary cap (0 = all)");
  trn->add_flag("--no-skem", o.no_skem, "Disable the syntax module");
  trn->add_flag("--no-pos", o.no_pos, "Drop POS embeddings");
  trn->add_flag("--no-dep", o.no_dep, "Drop dependency edges");
  trn->add_flag("--random-syntax", o.random_syntax, "Replace POS tags and edges with random ones");
  trn->add_flag("--normalize-adjacency", o.normalize, "Symmetric degree normalisation of the adjacency");

  auto* ev = app.add_subcommand("eval", "Exact-match evaluation of a trained model");
  ev->add_option("--model", o.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--test", o.test, "Gold corpus")->required()->check(CLI::ExistingFile);
  ev->add_option("--report", o.report, "EvalReport file (JSON)")->required();
  ev->add_option("--errors", o.errors, "ErrorBreakdown file (JSON)");
  ev->add_option("--predictions", o.predictions, "Write predicted corpus");

  auto* pred = app.add_subcommand("predict", "Predict quadruples for a corpus");
  pred->add_option("--model", o.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  pred->add_option("--in", o.in, "Input corpus")->required()->check(CLI::ExistingFile);
  pred->add_option("--out", o.out, "Output corpus with predicted quadruples")->required();
  pred->add_option("--trace", o.trace, "Decode trace (JSON)");

  auto* gc = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients on a toy model");
  gc->add_option("--seed", o.seed, "Fixture seed");
  gc->add_option("--out", o.out, "Report file (JSON)");

  auto* tp = app.add_subcommand("throughput", "Documents per second in train or inference mode");
  tp->add_option("--model", o.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  tp->add_option("--in", o.in, "Corpus")->required()->check(CLI::ExistingFile);
  tp->add_option("--mode", o.mode, "train | inference")->check(CLI::IsMember({"train", "inference"}));
  tp->add_option("--repetitions", o.repetitions, "Timed passes (>= 3)");
  tp->add_option("--out", o.out, "Report file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*convert) return cmd_convert(o, out);
    if (*split) return cmd_split(o, out);
    if (*stats) return cmd_stats(o, out);
    if (*analyze) return cmd_analyze(o, out);
    if (*kappa) return cmd_kappa(o, out);
    if (*synth) return cmd_synth(o, out);
    if (*trn) return cmd_train(o, out);
    if (*ev) return cmd_eval(o, out);
    if (*pred) return cmd_predict(o, out);
    if (*gc) return cmd_gradcheck(o, out);
    if (*tp) return cmd_throughput(o, out);
  } catch (const CLI::ValidationError& e) {
    err << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace gridquad::cli
