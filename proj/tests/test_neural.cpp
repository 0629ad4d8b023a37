#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fsseg/crf.hpp"
#include "fsseg/errors.hpp"
#include "fsseg/eval.hpp"
#include "fsseg/harness.hpp"
#include "fsseg/neural.hpp"
#include "fsseg/rng.hpp"

using namespace fsseg;

namespace {

constexpr int T = kNumTags;

TaggedSequence seq_of(std::vector<std::string> words, std::vector<Tag> tags, int id = 0) {
  TaggedSequence seq;
  seq.dialogue_id = "d";
  seq.turn_id = "t" + std::to_string(id);
  seq.speaker = "S";
  for (auto& w : words) seq.tokens.push_back({std::move(w), false});
  seq.tags = std::move(tags);
  return seq;
}

Corpus tiny_corpus() {
  Corpus corpus;
  corpus.sequences.push_back(seq_of({"xin", "chào", "cậu", "khỏe"},
                                    {Tag::BFs, Tag::IFs, Tag::BFs, Tag::IFs}, 0));
  corpus.sequences.push_back(seq_of({"đi", "chơi", "nhé"}, {Tag::BFs, Tag::IFs, Tag::IFs}, 1));
  corpus.sequences.push_back(seq_of({"xin", "đi"}, {Tag::BFs, Tag::BFs}, 2));
  return corpus;
}

NeuralConfig small_config(std::uint64_t seed) {
  NeuralConfig cfg;
  cfg.embedding_dim = 5;
  cfg.hidden_dim = 4;
  cfg.dropout = 0.0;
  cfg.seed = seed;
  return cfg;
}

void zero_model(NeuralModel& model) {
  model.embeddings.setZero();
  for (LstmParams* p : {&model.forward_lstm, &model.backward_lstm}) {
    p->w_input.setZero();
    p->w_recurrent.setZero();
    p->bias.setZero();
  }
  model.projection.setZero();
  model.projection_bias.setZero();
  model.transitions.setZero();
  model.bos_transitions.setZero();
  model.eos_transitions.setZero();
}

// Parameter blocks flattened to one vector, for finite differencing.
struct Packer {
  std::vector<Eigen::Map<const Eigen::VectorXd>> views;

  static std::vector<double*> block_ptrs(NeuralModel& m, std::vector<Eigen::Index>& sizes) {
    std::vector<double*> ptrs;
    auto add = [&](Eigen::MatrixXd& mat) {
      ptrs.push_back(mat.data());
      sizes.push_back(mat.size());
    };
    auto addv = [&](Eigen::VectorXd& v) {
      ptrs.push_back(v.data());
      sizes.push_back(v.size());
    };
    add(m.embeddings);
    add(m.forward_lstm.w_input);
    add(m.forward_lstm.w_recurrent);
    addv(m.forward_lstm.bias);
    add(m.backward_lstm.w_input);
    add(m.backward_lstm.w_recurrent);
    addv(m.backward_lstm.bias);
    add(m.projection);
    addv(m.projection_bias);
    add(m.transitions);
    addv(m.bos_transitions);
    addv(m.eos_transitions);
    return ptrs;
  }
};

Eigen::VectorXd pack_model(NeuralModel& model) {
  std::vector<Eigen::Index> sizes;
  auto ptrs = Packer::block_ptrs(model, sizes);
  Eigen::Index total = 0;
  for (auto s : sizes) total += s;
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (std::size_t b = 0; b < ptrs.size(); ++b) {
    out.segment(at, sizes[b]) = Eigen::Map<const Eigen::VectorXd>(ptrs[b], sizes[b]);
    at += sizes[b];
  }
  return out;
}

void unpack_model(NeuralModel& model, const Eigen::VectorXd& w) {
  std::vector<Eigen::Index> sizes;
  auto ptrs = Packer::block_ptrs(model, sizes);
  Eigen::Index at = 0;
  for (std::size_t b = 0; b < ptrs.size(); ++b) {
    Eigen::Map<Eigen::VectorXd>(ptrs[b], sizes[b]) = w.segment(at, sizes[b]);
    at += sizes[b];
  }
}

Eigen::VectorXd pack_gradients(const NeuralModel& shape, const NeuralGradients& g) {
  NeuralModel tmp = shape;
  tmp.embeddings = g.embeddings;
  tmp.forward_lstm = g.forward_lstm;
  tmp.backward_lstm = g.backward_lstm;
  tmp.projection = g.projection;
  tmp.projection_bias = g.projection_bias;
  tmp.transitions = g.transitions;
  tmp.bos_transitions = g.bos_transitions;
  tmp.eos_transitions = g.eos_transitions;
  return pack_model(tmp);
}

bool models_equal(const NeuralModel& a, const NeuralModel& b) {
  NeuralModel ca = a, cb = b;
  return (pack_model(ca) - pack_model(cb)).lpNorm<Eigen::Infinity>() == 0.0 &&
         a.vocab == b.vocab;
}

}  // namespace

TEST_CASE("all-zero parameters give all-zero scores") {
  const Corpus corpus = tiny_corpus();
  NeuralModel model = nn_init(corpus, small_config(1));
  zero_model(model);
  const Eigen::MatrixXd scores = nn_forward(model, corpus.sequences[0], false);
  CHECK(scores.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("evaluation-mode forward is exactly deterministic") {
  const Corpus corpus = tiny_corpus();
  NeuralConfig cfg = small_config(2);
  cfg.dropout = 0.5;
  const NeuralModel model = nn_init(corpus, cfg);
  const Eigen::MatrixXd a = nn_forward(model, corpus.sequences[0], false);
  const Eigen::MatrixXd b = nn_forward(model, corpus.sequences[0], false);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mirrored parameters reverse the scores of a reversed input") {
  const Corpus corpus = tiny_corpus();
  NeuralModel model = nn_init(corpus, small_config(3));
  // tie the two directions and make the projection symmetric across halves
  model.backward_lstm = model.forward_lstm;
  const Eigen::Index h = model.forward_lstm.w_recurrent.cols();
  model.projection.rightCols(h) = model.projection.leftCols(h);

  const TaggedSequence& seq = corpus.sequences[0];
  TaggedSequence reversed = seq;
  std::reverse(reversed.tokens.begin(), reversed.tokens.end());

  const Eigen::MatrixXd fwd = nn_forward(model, seq, false);
  const Eigen::MatrixXd rev = nn_forward(model, reversed, false);
  for (Eigen::Index i = 0; i < fwd.rows(); ++i) {
    for (int t = 0; t < T; ++t) {
      CHECK(rev(fwd.rows() - 1 - i, t) == doctest::Approx(fwd(i, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero model loss is n ln 2") {
  const Corpus corpus = tiny_corpus();
  NeuralModel model = nn_init(corpus, small_config(4));
  zero_model(model);
  for (const TaggedSequence& seq : corpus.sequences) {
    const auto [loss, grads] = nn_loss_grad(model, seq);
    CHECK(loss == doctest::Approx(seq.size() * std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("every parameter block passes the finite-difference check on 3 seeds") {
  const Corpus corpus = tiny_corpus();
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    NeuralModel model = nn_init(corpus, small_config(seed));
    const TaggedSequence& seq = corpus.sequences[0];

    ObjectiveFunction objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
      unpack_model(model, w);
      const auto [loss, grads] = nn_loss_grad(model, seq);
      grad = pack_gradients(model, grads);
      return loss;
    };
    const Eigen::VectorXd w0 = pack_model(model);
    CHECK(check_gradient(objective, w0) < 1e-4);
  }
}

TEST_CASE("with zero transitions the loss decomposes per position") {
  const Corpus corpus = tiny_corpus();
  NeuralModel model = nn_init(corpus, small_config(5));
  model.transitions.setZero();
  model.bos_transitions.setZero();
  model.eos_transitions.setZero();

  const TaggedSequence& seq = corpus.sequences[0];
  const Eigen::MatrixXd scores = nn_forward(model, seq, false);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double z = std::log(std::exp(scores(i, 0)) + std::exp(scores(i, 1)));
    expected += z - scores(i, static_cast<int>(seq.tags[static_cast<std::size_t>(i)]));
  }
  const auto [loss, grads] = nn_loss_grad(model, seq);
  CHECK(loss == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("the output CRF layer agrees with the crf module at order 1") {
  Rng rng(107);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(9));
    Eigen::MatrixXd scores(n, T);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < T; ++t) scores(i, t) = rng.uniform(-2.0, 2.0);
    }
    Eigen::MatrixXd transitions(T, T);
    Eigen::VectorXd flat(T * T);
    for (int p = 0; p < T; ++p) {
      for (int c = 0; c < T; ++c) {
        transitions(p, c) = rng.uniform(-1.0, 1.0);
        flat[p * T + c] = transitions(p, c);
      }
    }
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(T);

    const double layer_log_z = crf_layer_log_z(scores, transitions, zero, zero);
    const Lattice lattice = build_lattice(scores, flat, 1);
    CHECK(layer_log_z == doctest::Approx(lattice.log_z_alpha).epsilon(1e-10));

    const auto [layer_path, layer_score] = crf_layer_viterbi(scores, transitions, zero, zero);
    const auto [module_path, module_score] = viterbi_decode(scores, flat, 1);
    CHECK(layer_path == module_path);
    CHECK(layer_score == doctest::Approx(module_score).epsilon(1e-10));
  }
}

TEST_CASE("training is bit-identical under a fixed seed") {
  const Corpus corpus = tiny_corpus();
  NeuralConfig cfg = small_config(6);
  cfg.dropout = 0.3;
  cfg.epochs = 4;
  const auto [m1, losses1] = nn_train(corpus, cfg);
  const auto [m2, losses2] = nn_train(corpus, cfg);
  CHECK(losses1 == losses2);
  CHECK(models_equal(m1, m2));
}

TEST_CASE("learning rate zero leaves the parameters unchanged") {
  // no singleton tokens, so the <UNK> substitution never fires and the
  // trace must be exactly flat
  Corpus corpus;
  corpus.sequences.push_back(seq_of({"a", "b", "a"}, {Tag::BFs, Tag::IFs, Tag::BFs}, 0));
  corpus.sequences.push_back(seq_of({"b", "a", "b"}, {Tag::BFs, Tag::IFs, Tag::IFs}, 1));
  NeuralConfig cfg = small_config(7);
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  const auto [trained, losses] = nn_train(corpus, cfg);
  const NeuralModel fresh = nn_init(corpus, cfg);
  CHECK(models_equal(trained, fresh));
  CHECK(losses[0] == losses[1]);
  CHECK(losses[1] == losses[2]);
}

TEST_CASE("a 10-sequence corpus is overfit to perfect training chunks") {
  const Corpus corpus = generate_synthetic(10, 3, SynthProfile::MessageLike);
  NeuralConfig cfg;
  cfg.embedding_dim = 16;
  cfg.hidden_dim = 16;
  cfg.dropout = 0.0;
  cfg.learning_rate = 0.1;
  cfg.epochs = 30;
  cfg.seed = 9;
  const auto [model, losses] = nn_train(corpus, cfg);

  CHECK(losses.back() <= 0.05 * losses.front());

  std::vector<std::vector<Tag>> gold, pred;
  for (const TaggedSequence& seq : corpus.sequences) {
    gold.push_back(seq.tags);
    pred.push_back(nn_decode(model, seq));
  }
  CHECK(chunk_metrics(gold, pred).chunk.f1 == doctest::Approx(1.0));
}

TEST_CASE("zero-parameter decode tie-breaks to all B-fs") {
  const Corpus corpus = tiny_corpus();
  NeuralModel model = nn_init(corpus, small_config(8));
  zero_model(model);
  for (Tag t : nn_decode(model, corpus.sequences[0])) CHECK(t == Tag::BFs);
}

TEST_CASE("decode matches brute force over all paths for n <= 8") {
  const Corpus corpus = tiny_corpus();
  Rng rng(109);
  for (int trial = 0; trial < 10; ++trial) {
    NeuralModel model = nn_init(corpus, small_config(200 + trial));
    // random transition parameters too
    for (int p = 0; p < T; ++p) {
      model.bos_transitions[p] = rng.uniform(-1.0, 1.0);
      model.eos_transitions[p] = rng.uniform(-1.0, 1.0);
      for (int c = 0; c < T; ++c) model.transitions(p, c) = rng.uniform(-1.0, 1.0);
    }
    const TaggedSequence& seq = corpus.sequences[trial % corpus.sequences.size()];
    const Eigen::MatrixXd scores = nn_forward(model, seq, false);
    const int n = static_cast<int>(scores.rows());

    double best = -1e300;
    std::vector<int> best_path;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      std::vector<int> tags(n);
      for (int i = 0; i < n; ++i) tags[i] = (mask >> (n - 1 - i)) & 1;
      double s = model.bos_transitions[tags[0]] + model.eos_transitions[tags[n - 1]];
      for (int i = 0; i < n; ++i) {
        s += scores(i, tags[i]);
        if (i) s += model.transitions(tags[i - 1], tags[i]);
      }
      if (s > best) {
        best = s;
        best_path = tags;
      }
    }
    const std::vector<Tag> decoded = nn_decode(model, seq);
    for (int i = 0; i < n; ++i) {
      CHECK(static_cast<int>(decoded[static_cast<std::size_t>(i)]) == best_path[i]);
    }
  }
}

TEST_CASE("gradient clipping caps the global max-norm") {
  const Corpus corpus = tiny_corpus();
  NeuralModel model = nn_init(corpus, small_config(10));
  auto [loss, grads] = nn_loss_grad(model, corpus.sequences[0]);
  grads.projection.array() += 100.0;  // force a large entry
  const double before = grads.max_abs();
  REQUIRE(before > 5.0);
  const Eigen::MatrixXd embeddings_before = grads.embeddings;
  clip_gradients(grads, 5.0);
  CHECK(grads.max_abs() <= 5.0 + 1e-12);
  // clipping is one global rescale, not a per-entry truncation
  const double scale = 5.0 / before;
  CHECK((grads.embeddings - scale * embeddings_before).cwiseAbs().maxCoeff() < 1e-12);
  const double after = grads.max_abs();
  clip_gradients(grads, 5.0);  // no-op once under the cap
  CHECK(grads.max_abs() == after);
}

TEST_CASE("neural model file round trip is the identity") {
  const Corpus corpus = tiny_corpus();
  NeuralConfig cfg = small_config(12);
  cfg.epochs = 2;
  cfg.learning_rate = 0.05;
  const auto [model, losses] = nn_train(corpus, cfg);

  const auto path = std::filesystem::temp_directory_path() / "fsseg_test_neural_model.txt";
  save_neural_model(model, path);
  NeuralModel loaded = load_neural_model(path);
  CHECK(models_equal(model, loaded));
  CHECK(loaded.config.embedding_dim == cfg.embedding_dim);
  CHECK(loaded.config.seed == cfg.seed);
  for (const TaggedSequence& seq : corpus.sequences) {
    CHECK(nn_decode(model, seq) == nn_decode(loaded, seq));
  }
}

TEST_CASE("nn_init validates its configuration") {
  const Corpus corpus = tiny_corpus();
  NeuralConfig cfg = small_config(13);
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(nn_init(corpus, cfg), ConfigError);
  cfg = small_config(13);
  cfg.embedding_dim = 0;
  CHECK_THROWS_AS(nn_init(corpus, cfg), ConfigError);
  CHECK_THROWS_AS(nn_init(Corpus{}, small_config(13)), DataError);
}

TEST_CASE("out-of-vocabulary tokens map to <UNK>") {
  const Corpus corpus = tiny_corpus();
  const NeuralModel model = nn_init(corpus, small_config(14));
  CHECK(model.token_id("xin") > 0);
  CHECK(model.token_id("never-seen") == 0);
  const TaggedSequence oov = seq_of({"never-seen", "also-new"}, {Tag::BFs, Tag::IFs});
  CHECK_NOTHROW(nn_forward(model, oov, false));
}
