#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsseg/corpus.hpp"
#include "fsseg/eval.hpp"
#include "fsseg/model_io.hpp"
#include "fsseg/neural.hpp"

namespace fsseg {

enum class ModelKind { MaxEnt, Crf, BiLstmCrf };

ModelKind parse_model_kind(const std::string& s);  // maxent | crf | bilstm-crf
const std::string& model_kind_name(ModelKind kind);

struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::vector<int> assignments;  // corpus position -> fold index
};

// Seeded shuffle plus round-robin assignment; fold sizes differ by at most
// one. With by_dialogue all turns of one dialogue land in the same fold.
FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed, bool by_dialogue = false);

struct RunConfig {
  ModelKind model = ModelKind::Crf;
  TrainOptions train;    // maxent / crf
  NeuralConfig neural;   // bilstm-crf
  std::filesystem::path out_dir;
};

// Per-model defaults: the message-boundary feature turns on for message
// corpora, and the CRF gets a wider Gaussian prior (sigma 2) than the
// per-token maxent model (sigma 1).
RunConfig default_run_config(ModelKind kind, SourceKind source);

// Applies a parsed "key = value" config to the defaults; unknown keys are
// rejected with ConfigError.
RunConfig apply_config(const std::map<std::string, std::string>& entries, RunConfig base = {});

struct CvResult {
  std::vector<MetricsReport> per_fold;
  MetricsReport mean;    // unweighted mean over folds (headline number)
  MetricsReport pooled;  // recomputed from pooled counts
};

// Trains on k-1 folds, decodes the held-out fold and scores it. Writes the
// model, predictions and report per fold plus a summary when cfg.out_dir is
// set.
CvResult run_cv(const Corpus& corpus, const FoldPlan& plan, const RunConfig& cfg);

enum class SynthProfile { MessageLike, PhoneLike };

SynthProfile parse_synth_profile(const std::string& s);  // message | phone

struct SynthStats {
  std::size_t segments = 0;
  std::size_t tokens = 0;
};

// Sequences of 3-40 tokens built from 1-8 token segments. Segment-initial
// tokens come from a cue-word list with probability 0.8. The message-like
// profile adds msg_start flags and slang covered by the bundled toy chat
// dictionary; the phone-like profile adds hesitation and repetition tokens.
Corpus generate_synthetic(std::size_t n_sequences, std::uint64_t seed, SynthProfile profile,
                          SynthStats* stats = nullptr);

struct ModelComparison {
  double maxent_chunk_f1 = 0.0;
  double crf_chunk_f1 = 0.0;
  double bilstm_chunk_f1 = 0.0;
  std::string report;  // human-readable summary with the CRF vs ME flag
};

// Trains all three taggers on the same split and scores chunk F1 on the
// held-out part; flags (but does not fail on) CRF < ME.
ModelComparison compare_models(const Corpus& train, const Corpus& test, const RunConfig& cfg);

}  // namespace fsseg
