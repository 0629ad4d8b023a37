#include "fsseg/harness.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "fsseg/config.hpp"
#include "fsseg/crf.hpp"
#include "fsseg/errors.hpp"
#include "fsseg/maxent.hpp"
#include "fsseg/rng.hpp"

namespace fsseg {

namespace {

const std::string kModelKindNames[3] = {"maxent", "crf", "bilstm-crf"};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

Prf mean_prf(const std::vector<MetricsReport>& folds, Prf MetricsReport::*field) {
  Prf out;
  for (const MetricsReport& r : folds) {
    out.precision += (r.*field).precision;
    out.recall += (r.*field).recall;
    out.f1 += (r.*field).f1;
  }
  const double k = static_cast<double>(folds.size());
  out.precision /= k;
  out.recall /= k;
  out.f1 /= k;
  return out;
}

MetricsReport mean_report(const std::vector<MetricsReport>& folds) {
  MetricsReport mean;
  for (int t = 0; t < kNumTags; ++t) {
    for (const MetricsReport& r : folds) {
      mean.per_tag[t].precision += r.per_tag[t].precision;
      mean.per_tag[t].recall += r.per_tag[t].recall;
      mean.per_tag[t].f1 += r.per_tag[t].f1;
      mean.true_positives[t] += r.true_positives[t];
      mean.predicted_count[t] += r.predicted_count[t];
      mean.gold_count[t] += r.gold_count[t];
    }
    const double k = static_cast<double>(folds.size());
    mean.per_tag[t].precision /= k;
    mean.per_tag[t].recall /= k;
    mean.per_tag[t].f1 /= k;
  }
  mean.macro = mean_prf(folds, &MetricsReport::macro);
  mean.micro = mean_prf(folds, &MetricsReport::micro);
  mean.chunk = mean_prf(folds, &MetricsReport::chunk);
  for (const MetricsReport& r : folds) {
    mean.tokens += r.tokens;
    mean.gold_chunks += r.gold_chunks;
    mean.predicted_chunks += r.predicted_chunks;
    mean.correct_chunks += r.correct_chunks;
  }
  return mean;
}

MetricsReport pooled_report(const std::vector<MetricsReport>& folds) {
  MetricsReport pooled;
  for (const MetricsReport& r : folds) {
    for (int t = 0; t < kNumTags; ++t) {
      pooled.true_positives[t] += r.true_positives[t];
      pooled.predicted_count[t] += r.predicted_count[t];
      pooled.gold_count[t] += r.gold_count[t];
    }
    pooled.tokens += r.tokens;
    pooled.gold_chunks += r.gold_chunks;
    pooled.predicted_chunks += r.predicted_chunks;
    pooled.correct_chunks += r.correct_chunks;
  }
  auto prf = [](std::size_t correct, std::size_t predicted, std::size_t gold) {
    Prf p;
    p.precision = predicted ? static_cast<double>(correct) / predicted : 0.0;
    p.recall = gold ? static_cast<double>(correct) / gold : 0.0;
    p.f1 = f1_score(p.precision, p.recall);
    return p;
  };
  for (int t = 0; t < kNumTags; ++t) {
    pooled.per_tag[t] =
        prf(pooled.true_positives[t], pooled.predicted_count[t], pooled.gold_count[t]);
  }
  pooled.macro.precision = (pooled.per_tag[0].precision + pooled.per_tag[1].precision) / 2.0;
  pooled.macro.recall = (pooled.per_tag[0].recall + pooled.per_tag[1].recall) / 2.0;
  pooled.macro.f1 = f1_score(pooled.macro.precision, pooled.macro.recall);
  pooled.micro = prf(pooled.true_positives[0] + pooled.true_positives[1], pooled.tokens,
                     pooled.tokens);
  pooled.chunk = prf(pooled.correct_chunks, pooled.predicted_chunks, pooled.gold_chunks);
  return pooled;
}

std::vector<std::vector<Tag>> decode_all(ModelKind kind, const WeightedModel* linear,
                                         const NeuralModel* neural,
                                         const std::vector<TaggedSequence>& sequences) {
  std::vector<std::vector<Tag>> out;
  out.reserve(sequences.size());
  for (const TaggedSequence& seq : sequences) {
    switch (kind) {
      case ModelKind::MaxEnt:
        out.push_back(me_decode(*linear, seq));
        break;
      case ModelKind::Crf:
        out.push_back(crf_decode(*linear, seq).first);
        break;
      case ModelKind::BiLstmCrf:
        out.push_back(nn_decode(*neural, seq));
        break;
    }
  }
  return out;
}

}  // namespace

ModelKind parse_model_kind(const std::string& s) {
  for (int i = 0; i < 3; ++i) {
    if (s == kModelKindNames[i]) return static_cast<ModelKind>(i);
  }
  throw ConfigError("unknown model kind '" + s + "' (want maxent, crf or bilstm-crf)");
}

const std::string& model_kind_name(ModelKind kind) {
  return kModelKindNames[static_cast<int>(kind)];
}

FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed, bool by_dialogue) {
  const std::size_t n = corpus.sequences.size();
  if (k < 2) throw ConfigError("make_folds: at least 2 folds required");
  if (n < static_cast<std::size_t>(k)) {
    throw ConfigError("make_folds: corpus has " + std::to_string(n) + " turns, need at least " +
                      std::to_string(k));
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(n, 0);
  Rng rng(seed);

  if (by_dialogue) {
    std::vector<std::string> dialogues;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, fresh] = members.try_emplace(corpus.sequences[i].dialogue_id);
      if (fresh) dialogues.push_back(corpus.sequences[i].dialogue_id);
      it->second.push_back(i);
    }
    if (dialogues.size() < static_cast<std::size_t>(k)) {
      throw ConfigError("make_folds: fewer dialogues than folds");
    }
    rng.shuffle(dialogues);
    for (std::size_t d = 0; d < dialogues.size(); ++d) {
      for (std::size_t i : members[dialogues[d]]) {
        plan.assignments[i] = static_cast<int>(d % static_cast<std::size_t>(k));
      }
    }
    return plan;
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t i = 0; i < n; ++i) {
    plan.assignments[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return plan;
}

RunConfig default_run_config(ModelKind kind, SourceKind source) {
  RunConfig cfg;
  cfg.model = kind;
  cfg.train.use_msg_boundary = source == SourceKind::Message;
  if (kind == ModelKind::Crf) cfg.train.l2_sigma = 2.0;
  return cfg;
}

RunConfig apply_config(const std::map<std::string, std::string>& entries, RunConfig base) {
  for (const auto& [key, value] : entries) {
    if (key == "templates") {
      base.train.templates = templates_from_string(value);
    } else if (key == "cutoff") {
      base.train.cutoff = static_cast<std::size_t>(config_int(key, value));
    } else if (key == "use_msg_boundary") {
      base.train.use_msg_boundary = config_bool(key, value);
    } else if (key == "l2_sigma") {
      base.train.l2_sigma = config_double(key, value);
    } else if (key == "markov_order") {
      base.train.markov_order = config_int(key, value);
    } else if (key == "max_iterations") {
      base.train.optimizer.max_iterations = config_int(key, value);
    } else if (key == "history_size") {
      base.train.optimizer.history_size = config_int(key, value);
    } else if (key == "gradient_tolerance") {
      base.train.optimizer.gradient_tolerance = config_double(key, value);
    } else if (key == "wolfe_c1") {
      base.train.optimizer.wolfe_c1 = config_double(key, value);
    } else if (key == "wolfe_c2") {
      base.train.optimizer.wolfe_c2 = config_double(key, value);
    } else if (key == "embedding_dim") {
      base.neural.embedding_dim = config_int(key, value);
    } else if (key == "hidden_dim") {
      base.neural.hidden_dim = config_int(key, value);
    } else if (key == "dropout") {
      base.neural.dropout = config_double(key, value);
    } else if (key == "learning_rate") {
      base.neural.learning_rate = config_double(key, value);
    } else if (key == "clip") {
      base.neural.clip = config_double(key, value);
    } else if (key == "epochs") {
      base.neural.epochs = config_int(key, value);
    } else if (key == "seed") {
      base.neural.seed = static_cast<std::uint64_t>(config_int(key, value));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return base;
}

CvResult run_cv(const Corpus& corpus, const FoldPlan& plan, const RunConfig& cfg) {
  if (plan.assignments.size() != corpus.sequences.size()) {
    throw ConfigError("run_cv: fold plan does not match the corpus");
  }
  const bool writing = !cfg.out_dir.empty();
  if (writing) std::filesystem::create_directories(cfg.out_dir);

  CvResult result;
  for (int fold = 0; fold < plan.k; ++fold) {
    Corpus train;
    train.source_kind = corpus.source_kind;
    std::vector<TaggedSequence> test;
    std::set<std::pair<std::string, std::string>> train_ids;
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
      if (plan.assignments[i] == fold) {
        test.push_back(corpus.sequences[i]);
      } else {
        train.sequences.push_back(corpus.sequences[i]);
        train_ids.insert({corpus.sequences[i].dialogue_id, corpus.sequences[i].turn_id});
      }
    }
    if (train.sequences.empty() || test.empty()) {
      throw ConfigError("run_cv: fold " + std::to_string(fold) + " is empty");
    }
    for (const TaggedSequence& seq : test) {
      if (train_ids.count({seq.dialogue_id, seq.turn_id})) {
        throw DataError("run_cv: leakage, turn " + seq.dialogue_id + "/" + seq.turn_id +
                        " in both splits");
      }
    }

    std::filesystem::path fold_dir;
    if (writing) {
      fold_dir = cfg.out_dir / ("fold" + std::to_string(fold));
      std::filesystem::create_directories(fold_dir);
    }

    WeightedModel linear;
    NeuralModel neural;
    try {
      switch (cfg.model) {
        case ModelKind::MaxEnt: {
          auto [model, trace] = me_train(train, cfg.train);
          linear = std::move(model);
          if (writing) write_trace_csv(trace, fold_dir / "trace.csv");
          break;
        }
        case ModelKind::Crf: {
          auto [model, trace] = crf_train(train, cfg.train);
          linear = std::move(model);
          if (writing) write_trace_csv(trace, fold_dir / "trace.csv");
          break;
        }
        case ModelKind::BiLstmCrf: {
          auto [model, losses] = nn_train(train, cfg.neural);
          neural = std::move(model);
          break;
        }
      }
    } catch (const Error& e) {
      throw Error("run_cv: training failed on fold " + std::to_string(fold) + ": " + e.what());
    }

    const std::vector<std::vector<Tag>> predictions =
        decode_all(cfg.model, &linear, &neural, test);
    std::vector<std::vector<Tag>> gold;
    gold.reserve(test.size());
    for (const TaggedSequence& seq : test) gold.push_back(seq.tags);
    const MetricsReport report = evaluate_tags(gold, predictions);
    result.per_fold.push_back(report);

    if (writing) {
      if (cfg.model == ModelKind::BiLstmCrf) {
        save_neural_model(neural, fold_dir / "model.txt");
      } else {
        save_model(linear, fold_dir / "model.txt");
      }
      Corpus predicted;
      predicted.source_kind = corpus.source_kind;
      predicted.sequences = test;
      for (std::size_t i = 0; i < predicted.sequences.size(); ++i) {
        predicted.sequences[i].tags = predictions[i];
      }
      save_corpus(predicted, fold_dir / "pred.txt");
      write_text(fold_dir / "report.txt", format_report(report) + "\n" + report_key_values(report));
    }
  }

  result.mean = mean_report(result.per_fold);
  result.pooled = pooled_report(result.per_fold);

  if (writing) {
    std::string summary = "cross-validation (" + model_kind_name(cfg.model) + ", k=" +
                          std::to_string(plan.k) + ", seed=" + std::to_string(plan.seed) + ")\n\n";
    for (std::size_t i = 0; i < result.per_fold.size(); ++i) {
      char buf[80];
      std::snprintf(buf, sizeof(buf), "fold %zu chunk F1: %.4f\n", i,
                    result.per_fold[i].chunk.f1);
      summary += buf;
    }
    summary += "\nmean over folds:\n" + format_report(result.mean);
    summary += "\npooled counts:\n" + format_report(result.pooled);
    summary += "\n" + report_key_values(result.mean);
    write_text(cfg.out_dir / "cv_report.txt", summary);
  }
  return result;
}

SynthProfile parse_synth_profile(const std::string& s) {
  if (s == "message") return SynthProfile::MessageLike;
  if (s == "phone") return SynthProfile::PhoneLike;
  throw ConfigError("unknown profile '" + s + "' (want message or phone)");
}

namespace {

const std::vector<std::string> kCueWords = {"vâng", "dạ",  "ừ",   "thì", "nhưng", "à",
                                            "ờ",    "vì",  "nên", "rồi", "xin",   "này"};
const std::vector<std::string> kFinalParticles = {"nhé", "ạ",   "nha", "hả",
                                                  "đó",  "nhỉ", "hở",  "vậy"};
const std::vector<std::string> kContentWords = {
    "anh",  "em",    "tôi",  "bạn",  "đi",   "học",  "làm",  "ăn",   "cơm",  "nhà",
    "việc", "gì",    "có",   "một",  "hai",  "ngày", "mai",  "nay",  "đề",   "tài",
    "chung", "thời", "gian", "ngắn", "quá",  "sợ",   "được", "chơi", "xem",  "phim",
    "đang", "rất",   "vui",  "buồn", "mệt",  "khỏe", "cậu",  "tớ",   "mình", "bao",
    "giờ",  "sao",   "thế",  "chưa", "bắt",  "đầu",  "hướng", "dẫn", "dần",  "không"};
const std::vector<std::string> kHesitations = {"ừm", "ờm", "ơ"};

// Slang forms covered by data/chat_dict.tsv; same token count as the
// standard form so labeled output stays aligned.
const std::vector<std::pair<std::string, std::string>> kSlangMap = {
    {"không", "k"}, {"được", "dc"}, {"gì", "j"}, {"giờ", "h"}};

const std::string& pick(const std::vector<std::string>& words, Rng& rng) {
  return words[rng.below(words.size())];
}

}  // namespace

Corpus generate_synthetic(std::size_t n_sequences, std::uint64_t seed, SynthProfile profile,
                          SynthStats* stats) {
  if (n_sequences == 0) throw ConfigError("generate_synthetic: need at least one sequence");
  Rng rng(seed);
  Corpus corpus;
  corpus.source_kind =
      profile == SynthProfile::MessageLike ? SourceKind::Message : SourceKind::Phone;
  SynthStats tally;

  const bool message = profile == SynthProfile::MessageLike;
  for (std::size_t s = 0; s < n_sequences; ++s) {
    TaggedSequence seq;
    seq.dialogue_id = "synth-" + std::to_string(s / 10);
    seq.turn_id = "t" + std::to_string(s);
    seq.speaker = (s % 2 == 0) ? "S" : "A";

    // Plan the segments first: boundary cues overlap in real chat (a new
    // thought gets its own message and the previous one closes with a final
    // particle), so a start that draws no cue word forces the other two
    // signals instead of leaving the boundary unmarked.
    const std::size_t target = 3 + rng.below(38);  // 3..40 tokens
    std::size_t remaining = target;
    std::vector<std::size_t> lengths;
    std::vector<bool> cue_start;
    while (remaining > 0) {
      // Single-token segments exist but are rare, as in real turns. The
      // last segment absorbs the tail so turns do not end in truncated
      // one-token fragments.
      const std::size_t seg_len =
          remaining <= 8 ? remaining : (rng.bernoulli(0.03) ? 1 : 2 + rng.below(7));
      lengths.push_back(seg_len);
      cue_start.push_back(rng.bernoulli(0.8));
      remaining -= seg_len;
    }
    tally.segments += lengths.size();

    for (std::size_t seg = 0; seg < lengths.size(); ++seg) {
      const std::size_t seg_len = lengths[seg];
      const bool next_unmarked = seg + 1 < lengths.size() && !cue_start[seg + 1];
      for (std::size_t j = 0; j < seg_len; ++j) {
        Token tok;
        const bool seg_start = (j == 0);
        const bool seg_final = (j + 1 == seg_len) && seg_len >= 2;
        if (seg_start) {
          tok.text = cue_start[seg] ? pick(kCueWords, rng) : pick(kContentWords, rng);
        } else if (seg_final) {
          tok.text = (next_unmarked || rng.bernoulli(0.95)) ? pick(kFinalParticles, rng)
                                                            : pick(kContentWords, rng);
        } else if (!message && rng.bernoulli(0.15)) {
          tok.text = pick(kHesitations, rng);
        } else if (!message && !seq.tokens.empty() && rng.bernoulli(0.1)) {
          tok.text = seq.tokens.back().text;  // phone-style stutter
        } else {
          tok.text = pick(kContentWords, rng);
        }
        if (message) {
          for (const auto& [standard, slang] : kSlangMap) {
            if (tok.text == standard && rng.bernoulli(0.25)) {
              tok.text = slang;
              break;
            }
          }
          if (seq.tokens.empty()) {
            tok.msg_start = true;
          } else if (seg_start) {
            tok.msg_start = !cue_start[seg] || rng.bernoulli(0.85);
          } else {
            tok.msg_start = rng.bernoulli(0.02);
          }
        }
        seq.tokens.push_back(std::move(tok));
        seq.tags.push_back(seg_start ? Tag::BFs : Tag::IFs);
      }
    }
    tally.tokens += seq.tokens.size();
    corpus.sequences.push_back(std::move(seq));
  }

  if (stats != nullptr) *stats = tally;
  return corpus;
}

ModelComparison compare_models(const Corpus& train, const Corpus& test, const RunConfig& cfg) {
  ModelComparison cmp;
  std::vector<std::vector<Tag>> gold;
  gold.reserve(test.sequences.size());
  for (const TaggedSequence& seq : test.sequences) gold.push_back(seq.tags);

  auto chunk_f1 = [&](const std::vector<std::vector<Tag>>& pred) {
    return chunk_metrics(gold, pred).chunk.f1;
  };

  auto [me_model, me_trace] = me_train(train, cfg.train);
  cmp.maxent_chunk_f1 = chunk_f1(decode_all(ModelKind::MaxEnt, &me_model, nullptr, test.sequences));
  auto [crf_model, crf_trace] = crf_train(train, cfg.train);
  cmp.crf_chunk_f1 = chunk_f1(decode_all(ModelKind::Crf, &crf_model, nullptr, test.sequences));
  auto [nn_model, losses] = nn_train(train, cfg.neural);
  cmp.bilstm_chunk_f1 =
      chunk_f1(decode_all(ModelKind::BiLstmCrf, nullptr, &nn_model, test.sequences));

  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "chunk F1  maxent=%.4f  crf=%.4f  bilstm-crf=%.4f%s", cmp.maxent_chunk_f1,
                cmp.crf_chunk_f1, cmp.bilstm_chunk_f1,
                cmp.crf_chunk_f1 + 1e-12 < cmp.maxent_chunk_f1
                    ? "  [FLAG: CRF below ME on this data]"
                    : "");
  cmp.report = buf;
  return cmp;
}

}  // namespace fsseg
