#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fsseg/corpus.hpp"
#include "fsseg/rng.hpp"

namespace fsseg {

struct NeuralConfig {
  int embedding_dim = 50;
  int hidden_dim = 50;  // per direction
  double dropout = 0.5;
  double learning_rate = 0.01;
  double clip = 5.0;  // global max-norm gradient clip
  int epochs = 30;
  std::uint64_t seed = 1;
};

// One LSTM direction. Gate rows are stacked [input; forget; cell; output].
struct LstmParams {
  Eigen::MatrixXd w_input;      // 4H x D
  Eigen::MatrixXd w_recurrent;  // 4H x H
  Eigen::VectorXd bias;         // 4H
};

struct NeuralModel {
  NeuralConfig config;
  std::vector<std::string> vocab;  // id 0 is <UNK>
  std::unordered_map<std::string, int> vocab_index;
  Eigen::MatrixXd embeddings;  // V x D
  LstmParams forward_lstm;
  LstmParams backward_lstm;
  Eigen::MatrixXd projection;       // T x 2H
  Eigen::VectorXd projection_bias;  // T
  Eigen::MatrixXd transitions;      // T x T, previous tag -> current tag
  Eigen::VectorXd bos_transitions;  // start -> tag
  Eigen::VectorXd eos_transitions;  // tag -> end

  int token_id(const std::string& text) const;
};

// Same shapes as the trainable blocks of NeuralModel.
struct NeuralGradients {
  Eigen::MatrixXd embeddings;
  LstmParams forward_lstm;
  LstmParams backward_lstm;
  Eigen::MatrixXd projection;
  Eigen::VectorXd projection_bias;
  Eigen::MatrixXd transitions;
  Eigen::VectorXd bos_transitions;
  Eigen::VectorXd eos_transitions;

  double max_abs() const;
  void scale(double factor);
};

// First-order CRF output layer over injected per-position tag scores.
double crf_layer_log_z(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& transitions,
                       const Eigen::VectorXd& bos, const Eigen::VectorXd& eos);
double crf_layer_path_score(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& transitions,
                            const Eigen::VectorXd& bos, const Eigen::VectorXd& eos,
                            const std::vector<Tag>& tags);
// Negative log-likelihood of the gold path; fills the gradients w.r.t. the
// scores and the transition parameters.
double crf_layer_loss_grad(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& transitions,
                           const Eigen::VectorXd& bos, const Eigen::VectorXd& eos,
                           const std::vector<Tag>& tags, Eigen::MatrixXd& d_scores,
                           Eigen::MatrixXd& d_transitions, Eigen::VectorXd& d_bos,
                           Eigen::VectorXd& d_eos);
std::pair<std::vector<Tag>, double> crf_layer_viterbi(const Eigen::MatrixXd& scores,
                                                      const Eigen::MatrixXd& transitions,
                                                      const Eigen::VectorXd& bos,
                                                      const Eigen::VectorXd& eos);

// Vocabulary from the corpus tokens plus seeded random initialization.
NeuralModel nn_init(const Corpus& corpus, const NeuralConfig& config);

// Per-position tag scores from the concatenated bidirectional encoding.
// train_mode applies inverted dropout with a mask drawn from rng (a fresh
// generator seeded from the config when rng is null); evaluation mode is
// exactly deterministic.
Eigen::MatrixXd nn_forward(const NeuralModel& model, const TaggedSequence& seq, bool train_mode,
                           Rng* rng = nullptr);

// Sentence-level CRF negative log-likelihood and full gradients (CRF layer,
// projection, both LSTMs, embeddings). No dropout, so the result is exactly
// checkable by finite differences.
std::pair<double, NeuralGradients> nn_loss_grad(const NeuralModel& model,
                                                const TaggedSequence& seq);

// Rescales so the global max-norm does not exceed max_norm.
void clip_gradients(NeuralGradients& grads, double max_norm);

// Seeded SGD over shuffled sequences with inverted dropout, singleton
// <UNK> substitution and global max-norm clipping. Returns the model after
// the final epoch and the summed training loss per epoch.
std::pair<NeuralModel, std::vector<double>> nn_train(const Corpus& corpus,
                                                     const NeuralConfig& config);

std::vector<Tag> nn_decode(const NeuralModel& model, const TaggedSequence& seq);

void save_neural_model(const NeuralModel& model, const std::filesystem::path& path);
NeuralModel load_neural_model(const std::filesystem::path& path);

}  // namespace fsseg
