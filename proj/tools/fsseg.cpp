#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "fsseg/config.hpp"
#include "fsseg/crf.hpp"
#include "fsseg/errors.hpp"
#include "fsseg/eval.hpp"
#include "fsseg/harness.hpp"
#include "fsseg/maxent.hpp"
#include "fsseg/neural.hpp"
#include "fsseg/normalize.hpp"
#include "fsseg/text.hpp"

namespace {

using namespace fsseg;

RunConfig load_run_config(const std::string& config_path, const Corpus& corpus,
                          ModelKind kind) {
  RunConfig cfg = default_run_config(kind, corpus.source_kind);
  if (!config_path.empty()) cfg = apply_config(parse_config_file(config_path), cfg);
  return cfg;
}

int cmd_normalize(const std::string& in_path, const std::vector<std::string>& dict_paths,
                  bool lowercase_flag, const std::string& out_path) {
  Corpus corpus = load_corpus(in_path, false);
  std::vector<Dictionary> dicts;
  for (const std::string& p : dict_paths) dicts.push_back(load_dictionary(p, DictKind::Chat));
  // ASR transcripts are all lowercase anyway; fold phone corpora by default.
  const bool lowercase = lowercase_flag || corpus.source_kind == SourceKind::Phone;
  auto [normalized, report] = normalize_corpus(corpus, dicts, lowercase);
  save_corpus(normalized, out_path);
  std::printf("normalized %zu turns: %zu replacements, %zu -> %zu tokens\n",
              normalized.sequences.size(), report.replacements, report.tokens_in,
              report.tokens_out);
  for (const auto& [variant, hits] : report.per_entry_hits) {
    std::printf("  %-24s %zu\n", variant.c_str(), hits);
  }
  return 0;
}

int cmd_train(const std::string& model_name, const std::string& train_path,
              const std::string& config_path, const std::string& out_path,
              const std::string& trace_path) {
  const ModelKind kind = parse_model_kind(model_name);
  Corpus corpus = load_corpus(train_path, true);
  RunConfig cfg = load_run_config(config_path, corpus, kind);

  OptimizationTrace trace;
  switch (kind) {
    case ModelKind::MaxEnt: {
      auto [model, t] = me_train(corpus, cfg.train);
      trace = std::move(t);
      save_model(model, out_path);
      break;
    }
    case ModelKind::Crf: {
      auto [model, t] = crf_train(corpus, cfg.train);
      trace = std::move(t);
      save_model(model, out_path);
      break;
    }
    case ModelKind::BiLstmCrf: {
      auto [model, losses] = nn_train(corpus, cfg.neural);
      save_neural_model(model, out_path);
      std::printf("trained %s: %d epochs, loss %.4f -> %.4f\n", model_name.c_str(),
                  cfg.neural.epochs, losses.front(), losses.back());
      return 0;
    }
  }
  std::printf("trained %s: %d iterations, value %.6f, gradient max-norm %.3g%s\n",
              model_name.c_str(), trace.iterations, trace.final_value,
              trace.final_gradient_norm, trace.converged ? "" : " (iteration cap reached)");
  if (!trace_path.empty()) write_trace_csv(trace, trace_path);
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& in_path,
                const std::string& out_path) {
  Corpus corpus = load_corpus(in_path, false);
  const std::string type = peek_model_type(model_path);

  std::vector<std::vector<Tag>> predictions;
  if (type == "bilstm-crf") {
    NeuralModel model = load_neural_model(model_path);
    for (const TaggedSequence& seq : corpus.sequences) predictions.push_back(nn_decode(model, seq));
  } else {
    WeightedModel model = load_model(model_path);
    for (const TaggedSequence& seq : corpus.sequences) {
      predictions.push_back(type == "crf" ? crf_decode(model, seq).first : me_decode(model, seq));
    }
  }
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    corpus.sequences[i].tags = predictions[i];
  }
  save_corpus(corpus, out_path);
  std::printf("tagged %zu turns with the %s model\n", corpus.sequences.size(), type.c_str());
  return 0;
}

int cmd_evaluate(const std::string& gold_path, const std::string& pred_path,
                 const std::string& report_path) {
  Corpus gold_corpus = load_corpus(gold_path, true);
  Corpus pred_corpus = load_corpus(pred_path, true);
  if (gold_corpus.sequences.size() != pred_corpus.sequences.size()) {
    throw DataError("gold and prediction corpora have different turn counts");
  }
  std::vector<std::vector<Tag>> gold, pred;
  for (std::size_t i = 0; i < gold_corpus.sequences.size(); ++i) {
    gold.push_back(gold_corpus.sequences[i].tags);
    pred.push_back(pred_corpus.sequences[i].tags);
  }
  const MetricsReport report = evaluate_tags(gold, pred);
  const std::string text = format_report(report);
  std::fputs(text.c_str(), stdout);
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw Error("cannot write report " + report_path);
    out << text << "\n" << report_key_values(report);
  }
  return 0;
}

int cmd_cv(const std::string& model_name, const std::string& corpus_path, int k,
           std::uint64_t seed, const std::string& config_path, const std::string& out_dir,
           bool by_dialogue) {
  const ModelKind kind = parse_model_kind(model_name);
  Corpus corpus = load_corpus(corpus_path, true);
  RunConfig cfg = load_run_config(config_path, corpus, kind);
  cfg.out_dir = out_dir;
  const FoldPlan plan = make_folds(corpus, k, seed, by_dialogue);
  const CvResult result = run_cv(corpus, plan, cfg);
  for (std::size_t i = 0; i < result.per_fold.size(); ++i) {
    std::printf("fold %zu chunk F1: %.4f\n", i, result.per_fold[i].chunk.f1);
  }
  std::printf("\nmean over folds:\n%s", format_report(result.mean).c_str());
  return 0;
}

int cmd_synth(int n, std::uint64_t seed, const std::string& profile_name,
              const std::string& out_path) {
  SynthStats stats;
  const Corpus corpus =
      generate_synthetic(static_cast<std::size_t>(n), seed, parse_synth_profile(profile_name),
                         &stats);
  save_corpus(corpus, out_path);
  std::printf("generated %zu turns, %zu segments, %zu tokens\n", corpus.sequences.size(),
              stats.segments, stats.tokens);
  return 0;
}

int cmd_kappa(const std::string& ratings_path) {
  std::ifstream in(ratings_path);
  if (!in) throw ParseError("cannot open ratings file " + ratings_path);
  std::vector<std::vector<std::size_t>> ratings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::size_t> row;
    for (const std::string& cell : split(line, ',')) {
      try {
        row.push_back(static_cast<std::size_t>(std::stoul(cell)));
      } catch (const std::exception&) {
        throw ParseError(ratings_path + ":" + std::to_string(line_no) + ": bad count '" + cell +
                         "'");
      }
    }
    ratings.push_back(std::move(row));
  }
  std::printf("fleiss_kappa=%.6f\n", fleiss_kappa(ratings));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"functional segment tagger for conversational text"};
  app.require_subcommand(1);

  auto* normalize = app.add_subcommand("normalize", "rewrite non-standard tokens");
  std::string norm_in, norm_out;
  std::vector<std::string> norm_dicts;
  bool norm_lower = false;
  normalize->add_option("--in", norm_in, "input corpus")->required();
  normalize->add_option("--dict", norm_dicts, "dictionary TSV (repeatable)")->required();
  normalize->add_flag("--lowercase", norm_lower, "case-fold all tokens");
  normalize->add_option("--out", norm_out, "output corpus")->required();

  auto* train = app.add_subcommand("train", "train a tagger");
  std::string train_model, train_in, train_config, train_out, train_trace;
  train->add_option("--model", train_model, "maxent | crf | bilstm-crf")->required();
  train->add_option("--train", train_in, "labeled training corpus")->required();
  train->add_option("--config", train_config, "key = value config file");
  train->add_option("--out", train_out, "model output path")->required();
  train->add_option("--trace", train_trace, "optimizer trace CSV");

  auto* predict = app.add_subcommand("predict", "tag a corpus with a trained model");
  std::string pred_model, pred_in, pred_out;
  predict->add_option("--model-file", pred_model, "trained model path")->required();
  predict->add_option("--in", pred_in, "input corpus")->required();
  predict->add_option("--out", pred_out, "tagged output corpus")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold");
  std::string eval_gold, eval_pred, eval_report;
  evaluate->add_option("--gold", eval_gold, "gold corpus")->required();
  evaluate->add_option("--pred", eval_pred, "predicted corpus")->required();
  evaluate->add_option("--report", eval_report, "report output path");

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
  std::string cv_model, cv_corpus, cv_config, cv_out;
  int cv_k = 5;
  std::uint64_t cv_seed = 0;
  bool cv_by_dialogue = false;
  cv->add_option("--model", cv_model, "maxent | crf | bilstm-crf")->required();
  cv->add_option("--corpus", cv_corpus, "labeled corpus")->required();
  cv->add_option("--k", cv_k, "fold count");
  cv->add_option("--seed", cv_seed, "shuffle seed");
  cv->add_option("--config", cv_config, "key = value config file");
  cv->add_option("--out-dir", cv_out, "artifact directory")->required();
  cv->add_flag("--by-dialogue", cv_by_dialogue, "split at dialogue granularity");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  int synth_n = 100;
  std::uint64_t synth_seed = 0;
  std::string synth_profile = "message", synth_out;
  synth->add_option("--n", synth_n, "number of turns")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--profile", synth_profile, "message | phone");
  synth->add_option("--out", synth_out, "output corpus")->required();

  auto* kappa = app.add_subcommand("kappa", "Fleiss' kappa from a ratings CSV");
  std::string kappa_ratings;
  kappa->add_option("--ratings", kappa_ratings, "items x categories CSV of counts")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (normalize->parsed()) return cmd_normalize(norm_in, norm_dicts, norm_lower, norm_out);
    if (train->parsed()) return cmd_train(train_model, train_in, train_config, train_out,
                                          train_trace);
    if (predict->parsed()) return cmd_predict(pred_model, pred_in, pred_out);
    if (evaluate->parsed()) return cmd_evaluate(eval_gold, eval_pred, eval_report);
    if (cv->parsed()) return cmd_cv(cv_model, cv_corpus, cv_k, cv_seed, cv_config, cv_out,
                                    cv_by_dialogue);
    if (synth->parsed()) return cmd_synth(synth_n, synth_seed, synth_profile, synth_out);
    if (kappa->parsed()) return cmd_kappa(kappa_ratings);
  } catch (const fsseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
