#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "fsseg/config.hpp"
#include "fsseg/errors.hpp"
#include "fsseg/harness.hpp"
#include "fsseg/maxent.hpp"
#include "fsseg/normalize.hpp"

using namespace fsseg;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fsseg_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::vector<std::size_t> fold_sizes(const FoldPlan& plan) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(plan.k), 0);
  for (int f : plan.assignments) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

}  // namespace

TEST_CASE("make_folds balances fold sizes") {
  const Corpus ten = generate_synthetic(10, 1, SynthProfile::MessageLike);
  const FoldPlan plan10 = make_folds(ten, 5, 42);
  CHECK(fold_sizes(plan10) == std::vector<std::size_t>{2, 2, 2, 2, 2});

  const Corpus eleven = generate_synthetic(11, 1, SynthProfile::MessageLike);
  const FoldPlan plan11 = make_folds(eleven, 5, 42);
  auto sizes = fold_sizes(plan11);
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<std::size_t>{2, 2, 2, 2, 3});

  // every sequence lands in exactly one fold by construction; same seed,
  // same plan
  const FoldPlan again = make_folds(eleven, 5, 42);
  CHECK(again.assignments == plan11.assignments);
  const FoldPlan other = make_folds(eleven, 5, 43);
  CHECK(other.assignments != plan11.assignments);
}

TEST_CASE("make_folds rejects bad configurations") {
  const Corpus corpus = generate_synthetic(4, 1, SynthProfile::MessageLike);
  CHECK_THROWS_AS(make_folds(corpus, 1, 0), ConfigError);
  CHECK_THROWS_AS(make_folds(corpus, 5, 0), ConfigError);
}

TEST_CASE("dialogue-level folds keep dialogues together") {
  const Corpus corpus = generate_synthetic(40, 2, SynthProfile::MessageLike);
  const FoldPlan plan = make_folds(corpus, 4, 7, true);
  std::map<std::string, int> dialogue_fold;
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    const std::string& d = corpus.sequences[i].dialogue_id;
    auto it = dialogue_fold.find(d);
    if (it == dialogue_fold.end()) {
      dialogue_fold[d] = plan.assignments[i];
    } else {
      CHECK(it->second == plan.assignments[i]);
    }
  }
}

TEST_CASE("generate_synthetic is deterministic and self-consistent") {
  SynthStats stats;
  const Corpus corpus = generate_synthetic(50, 9, SynthProfile::MessageLike, &stats);
  const Corpus again = generate_synthetic(50, 9, SynthProfile::MessageLike);
  CHECK(corpus == again);

  std::size_t segments = 0, tokens = 0;
  for (const TaggedSequence& seq : corpus.sequences) {
    CHECK(seq.size() >= 3);
    CHECK(seq.size() <= 40);
    CHECK(seq.tags[0] == Tag::BFs);
    const auto segs = segments_from_tags(seq.tags);
    segments += segs.size();
    tokens += seq.size();
    for (const Segment& s : segs) CHECK(s.end - s.start <= 8);
  }
  CHECK(stats.segments == segments);
  CHECK(stats.tokens == tokens);
  CHECK_NOTHROW(validate(corpus));
}

TEST_CASE("message profile carries boundaries and slang; phone does not") {
  const Corpus message = generate_synthetic(40, 11, SynthProfile::MessageLike);
  CHECK(message.source_kind == SourceKind::Message);
  bool any_mb = false;
  bool any_slang = false;
  const Dictionary chat =
      load_dictionary(std::string(FSSEG_DATA_DIR) + "/chat_dict.tsv", DictKind::Chat);
  for (const TaggedSequence& seq : message.sequences) {
    CHECK(seq.tokens[0].msg_start);
    for (const Token& tok : seq.tokens) {
      any_mb |= tok.msg_start;
      any_slang |= chat.find(tok.text) >= 0;
    }
  }
  CHECK(any_mb);
  CHECK(any_slang);

  const Corpus phone = generate_synthetic(40, 11, SynthProfile::PhoneLike);
  CHECK(phone.source_kind == SourceKind::Phone);
  bool any_phone_mb = false;
  bool any_hesitation = false;
  for (const TaggedSequence& seq : phone.sequences) {
    for (const Token& tok : seq.tokens) {
      any_phone_mb |= tok.msg_start;
      any_hesitation |= tok.text == "ừm" || tok.text == "ờm" || tok.text == "ơ";
    }
  }
  CHECK_FALSE(any_phone_mb);
  CHECK(any_hesitation);

  CHECK_THROWS_AS(generate_synthetic(0, 1, SynthProfile::MessageLike), ConfigError);
}

TEST_CASE("config file parsing and application") {
  const auto path = std::filesystem::temp_directory_path() / "fsseg_test_cfg.txt";
  {
    std::ofstream out(path);
    out << "# comment\n"
        << "markov_order = 1\n"
        << "l2_sigma = 2.5   # trailing comment\n"
        << "use_msg_boundary = true\n"
        << "epochs = 7\n";
  }
  const auto entries = parse_config_file(path);
  const RunConfig cfg = apply_config(entries);
  CHECK(cfg.train.markov_order == 1);
  CHECK(cfg.train.l2_sigma == 2.5);
  CHECK(cfg.train.use_msg_boundary);
  CHECK(cfg.neural.epochs == 7);

  CHECK_THROWS_AS(apply_config({{"not_a_key", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"epochs", "seven"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"use_msg_boundary", "yes"}}), ConfigError);

  {
    std::ofstream out(path);
    out << "a = 1\na = 2\n";
  }
  CHECK_THROWS_AS(parse_config_file(path), ParseError);
  {
    std::ofstream out(path);
    out << "just a line\n";
  }
  CHECK_THROWS_AS(parse_config_file(path), ParseError);
}

TEST_CASE("model kind and profile parsing") {
  CHECK(parse_model_kind("maxent") == ModelKind::MaxEnt);
  CHECK(parse_model_kind("crf") == ModelKind::Crf);
  CHECK(parse_model_kind("bilstm-crf") == ModelKind::BiLstmCrf);
  CHECK_THROWS_AS(parse_model_kind("svm"), ConfigError);
  CHECK(model_kind_name(ModelKind::Crf) == "crf");
  CHECK(parse_synth_profile("message") == SynthProfile::MessageLike);
  CHECK(parse_synth_profile("phone") == SynthProfile::PhoneLike);
  CHECK_THROWS_AS(parse_synth_profile("radio"), ConfigError);
}

TEST_CASE("run_cv is deterministic, leak-free and writes its artifacts") {
  const Corpus corpus = generate_synthetic(30, 21, SynthProfile::MessageLike);
  const FoldPlan plan = make_folds(corpus, 3, 5);

  RunConfig cfg = default_run_config(ModelKind::Crf, corpus.source_kind);
  cfg.train.optimizer.max_iterations = 60;
  cfg.out_dir = temp_dir("cv_artifacts");

  const CvResult first = run_cv(corpus, plan, cfg);
  REQUIRE(first.per_fold.size() == 3);
  CHECK(first.mean.chunk.f1 > 0.5);

  // unweighted mean over folds
  double sum = 0.0;
  for (const MetricsReport& r : first.per_fold) sum += r.chunk.f1;
  CHECK(first.mean.chunk.f1 == doctest::Approx(sum / 3.0).epsilon(1e-12));
  // pooled counts add up
  std::size_t gold_total = 0;
  for (const MetricsReport& r : first.per_fold) gold_total += r.gold_chunks;
  CHECK(first.pooled.gold_chunks == gold_total);

  const CvResult second = run_cv(corpus, plan, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(first.per_fold[i].chunk.f1 == second.per_fold[i].chunk.f1);
    CHECK(first.per_fold[i].micro.f1 == second.per_fold[i].micro.f1);
  }

  CHECK(std::filesystem::exists(cfg.out_dir / "cv_report.txt"));
  for (int fold = 0; fold < 3; ++fold) {
    const auto dir = cfg.out_dir / ("fold" + std::to_string(fold));
    CHECK(std::filesystem::exists(dir / "model.txt"));
    CHECK(std::filesystem::exists(dir / "pred.txt"));
    CHECK(std::filesystem::exists(dir / "report.txt"));
    CHECK(std::filesystem::exists(dir / "trace.csv"));
  }

  // a mismatched plan is rejected
  const Corpus other = generate_synthetic(8, 1, SynthProfile::MessageLike);
  CHECK_THROWS_AS(run_cv(other, plan, cfg), ConfigError);
}

TEST_CASE("run_cv works for all three model kinds on a small corpus") {
  const Corpus corpus = generate_synthetic(12, 23, SynthProfile::MessageLike);
  const FoldPlan plan = make_folds(corpus, 3, 1);

  RunConfig cfg = default_run_config(ModelKind::MaxEnt, corpus.source_kind);
  cfg.train.optimizer.max_iterations = 40;
  CHECK_NOTHROW(run_cv(corpus, plan, cfg));

  cfg = default_run_config(ModelKind::BiLstmCrf, corpus.source_kind);
  cfg.neural.embedding_dim = 8;
  cfg.neural.hidden_dim = 8;
  cfg.neural.epochs = 3;
  const CvResult nn = run_cv(corpus, plan, cfg);
  CHECK(nn.per_fold.size() == 3);
}

TEST_CASE("compare_models reports all three taggers") {
  const Corpus train = generate_synthetic(25, 31, SynthProfile::MessageLike);
  Corpus test = generate_synthetic(10, 32, SynthProfile::MessageLike);
  for (TaggedSequence& seq : test.sequences) seq.dialogue_id = "test-" + seq.dialogue_id;

  RunConfig cfg = default_run_config(ModelKind::Crf, train.source_kind);
  cfg.train.optimizer.max_iterations = 60;
  cfg.neural.embedding_dim = 8;
  cfg.neural.hidden_dim = 8;
  cfg.neural.epochs = 5;
  const ModelComparison cmp = compare_models(train, test, cfg);
  CHECK(cmp.maxent_chunk_f1 >= 0.0);
  CHECK(cmp.crf_chunk_f1 >= 0.0);
  CHECK(cmp.bilstm_chunk_f1 >= 0.0);
  CHECK(cmp.report.find("chunk F1") != std::string::npos);
}

TEST_CASE("maxent model file round trip through run-find artifacts") {
  const Corpus corpus = generate_synthetic(10, 41, SynthProfile::MessageLike);
  RunConfig cfg = default_run_config(ModelKind::MaxEnt, corpus.source_kind);
  cfg.train.optimizer.max_iterations = 40;
  auto [model, trace] = me_train(corpus, cfg.train);
  const auto path = std::filesystem::temp_directory_path() / "fsseg_test_me_model.txt";
  save_model(model, path);
  CHECK(peek_model_type(path) == "maxent");
  const MaxEntModel loaded = load_model(path);
  CHECK((loaded.emission - model.emission).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(loaded.vocab == model.vocab);
  for (const TaggedSequence& seq : corpus.sequences) {
    CHECK(me_decode(loaded, seq) == me_decode(model, seq));
  }
}
