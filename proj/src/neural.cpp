#include "fsseg/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <unordered_set>

#include "fsseg/errors.hpp"
#include "fsseg/model_io.hpp"
#include "fsseg/numeric.hpp"

namespace fsseg {

namespace {

constexpr int T = kNumTags;
constexpr const char* kUnkToken = "<UNK>";

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& z) { return 1.0 / (1.0 + (-z).exp()); }

// One direction of the encoder with everything the backward pass needs.
struct DirectionCache {
  Eigen::MatrixXd in, forget, cell, out;  // activated gates, n x H
  Eigen::MatrixXd c, tanh_c, h;           // n x H
};

DirectionCache run_lstm(const LstmParams& params, const Eigen::MatrixXd& x, bool reverse) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h_dim = params.w_recurrent.cols();
  DirectionCache cache;
  cache.in.resize(n, h_dim);
  cache.forget.resize(n, h_dim);
  cache.cell.resize(n, h_dim);
  cache.out.resize(n, h_dim);
  cache.c.resize(n, h_dim);
  cache.tanh_c.resize(n, h_dim);
  cache.h.resize(n, h_dim);

  Eigen::VectorXd prev_h = Eigen::VectorXd::Zero(h_dim);
  Eigen::VectorXd prev_c = Eigen::VectorXd::Zero(h_dim);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index t = reverse ? n - 1 - k : k;
    const Eigen::VectorXd z =
        params.w_input * x.row(t).transpose() + params.w_recurrent * prev_h + params.bias;
    const Eigen::ArrayXd gi = sigmoid(z.segment(0, h_dim).array());
    const Eigen::ArrayXd gf = sigmoid(z.segment(h_dim, h_dim).array());
    const Eigen::ArrayXd gg = z.segment(2 * h_dim, h_dim).array().tanh();
    const Eigen::ArrayXd go = sigmoid(z.segment(3 * h_dim, h_dim).array());
    const Eigen::ArrayXd c = gf * prev_c.array() + gi * gg;
    const Eigen::ArrayXd tc = c.tanh();
    cache.in.row(t) = gi;
    cache.forget.row(t) = gf;
    cache.cell.row(t) = gg;
    cache.out.row(t) = go;
    cache.c.row(t) = c;
    cache.tanh_c.row(t) = tc;
    cache.h.row(t) = go * tc;
    prev_h = cache.h.row(t);
    prev_c = cache.c.row(t);
  }
  return cache;
}

// Accumulates parameter gradients for one direction given d_h, the loss
// gradient w.r.t. this direction's hidden states. Adds input gradients to
// d_x.
void backprop_lstm(const LstmParams& params, const Eigen::MatrixXd& x, const DirectionCache& cache,
                   const Eigen::MatrixXd& d_h_ext, bool reverse, LstmParams& grads,
                   Eigen::MatrixXd& d_x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h_dim = params.w_recurrent.cols();
  Eigen::ArrayXd dh_carry = Eigen::ArrayXd::Zero(h_dim);
  Eigen::ArrayXd dc_carry = Eigen::ArrayXd::Zero(h_dim);
  Eigen::VectorXd dz(4 * h_dim);

  for (Eigen::Index k = n - 1; k >= 0; --k) {
    const Eigen::Index t = reverse ? n - 1 - k : k;
    const Eigen::Index t_prev = reverse ? t + 1 : t - 1;  // in this direction's time order
    const bool first = (k == 0);

    const Eigen::ArrayXd gi = cache.in.row(t);
    const Eigen::ArrayXd gf = cache.forget.row(t);
    const Eigen::ArrayXd gg = cache.cell.row(t);
    const Eigen::ArrayXd go = cache.out.row(t);
    const Eigen::ArrayXd tc = cache.tanh_c.row(t);
    const Eigen::ArrayXd prev_c =
        first ? Eigen::ArrayXd::Zero(h_dim).eval() : Eigen::ArrayXd(cache.c.row(t_prev));

    const Eigen::ArrayXd dh = d_h_ext.row(t).transpose().array() + dh_carry;
    const Eigen::ArrayXd d_out = dh * tc;
    const Eigen::ArrayXd dc = dc_carry + dh * go * (1.0 - tc * tc);
    const Eigen::ArrayXd d_in = dc * gg;
    const Eigen::ArrayXd d_forget = dc * prev_c;
    const Eigen::ArrayXd d_cell = dc * gi;

    dz.segment(0, h_dim) = d_in * gi * (1.0 - gi);
    dz.segment(h_dim, h_dim) = d_forget * gf * (1.0 - gf);
    dz.segment(2 * h_dim, h_dim) = d_cell * (1.0 - gg * gg);
    dz.segment(3 * h_dim, h_dim) = d_out * go * (1.0 - go);

    grads.w_input += dz * x.row(t);
    if (!first) grads.w_recurrent += dz * cache.h.row(t_prev);
    grads.bias += dz;
    d_x.row(t) += (params.w_input.transpose() * dz).transpose();
    dh_carry = first ? Eigen::ArrayXd::Zero(h_dim)
                     : Eigen::ArrayXd(params.w_recurrent.transpose() * dz);
    dc_carry = dc * gf;
  }
}

struct ForwardCache {
  std::vector<int> token_ids;
  Eigen::MatrixXd x;       // n x D embedded inputs
  DirectionCache fwd, bwd;
  Eigen::MatrixXd concat;  // n x 2H after dropout
  Eigen::MatrixXd mask;    // n x 2H inverted-dropout mask (empty in eval mode)
  Eigen::MatrixXd scores;  // n x T
};

ForwardCache encode(const NeuralModel& model, const std::vector<int>& token_ids,
                    const Eigen::MatrixXd* dropout_mask) {
  const Eigen::Index n = static_cast<Eigen::Index>(token_ids.size());
  const Eigen::Index d = model.embeddings.cols();
  const Eigen::Index h_dim = model.forward_lstm.w_recurrent.cols();

  ForwardCache cache;
  cache.token_ids = token_ids;
  cache.x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    cache.x.row(i) = model.embeddings.row(token_ids[static_cast<std::size_t>(i)]);
  }
  cache.fwd = run_lstm(model.forward_lstm, cache.x, false);
  cache.bwd = run_lstm(model.backward_lstm, cache.x, true);

  cache.concat.resize(n, 2 * h_dim);
  cache.concat.leftCols(h_dim) = cache.fwd.h;
  cache.concat.rightCols(h_dim) = cache.bwd.h;
  if (dropout_mask != nullptr) {
    cache.mask = *dropout_mask;
    cache.concat = cache.concat.cwiseProduct(cache.mask);
  }
  cache.scores = (cache.concat * model.projection.transpose()).rowwise() +
                 model.projection_bias.transpose();
  return cache;
}

NeuralGradients zero_gradients(const NeuralModel& model) {
  NeuralGradients g;
  g.embeddings = Eigen::MatrixXd::Zero(model.embeddings.rows(), model.embeddings.cols());
  auto zero_lstm = [](const LstmParams& p) {
    return LstmParams{Eigen::MatrixXd::Zero(p.w_input.rows(), p.w_input.cols()),
                      Eigen::MatrixXd::Zero(p.w_recurrent.rows(), p.w_recurrent.cols()),
                      Eigen::VectorXd::Zero(p.bias.size())};
  };
  g.forward_lstm = zero_lstm(model.forward_lstm);
  g.backward_lstm = zero_lstm(model.backward_lstm);
  g.projection = Eigen::MatrixXd::Zero(model.projection.rows(), model.projection.cols());
  g.projection_bias = Eigen::VectorXd::Zero(model.projection_bias.size());
  g.transitions = Eigen::MatrixXd::Zero(T, T);
  g.bos_transitions = Eigen::VectorXd::Zero(T);
  g.eos_transitions = Eigen::VectorXd::Zero(T);
  return g;
}

double loss_and_backprop(const NeuralModel& model, const std::vector<int>& token_ids,
                         const std::vector<Tag>& tags, const Eigen::MatrixXd* dropout_mask,
                         NeuralGradients& grads) {
  const ForwardCache cache = encode(model, token_ids, dropout_mask);
  const Eigen::Index n = cache.scores.rows();
  const Eigen::Index h_dim = model.forward_lstm.w_recurrent.cols();

  Eigen::MatrixXd d_scores(n, T);
  const double loss =
      crf_layer_loss_grad(cache.scores, model.transitions, model.bos_transitions,
                          model.eos_transitions, tags, d_scores, grads.transitions,
                          grads.bos_transitions, grads.eos_transitions);

  grads.projection += d_scores.transpose() * cache.concat;
  grads.projection_bias += d_scores.colwise().sum().transpose();
  Eigen::MatrixXd d_concat = d_scores * model.projection;
  if (dropout_mask != nullptr) d_concat = d_concat.cwiseProduct(cache.mask);

  Eigen::MatrixXd d_x = Eigen::MatrixXd::Zero(n, model.embeddings.cols());
  backprop_lstm(model.forward_lstm, cache.x, cache.fwd, d_concat.leftCols(h_dim), false,
                grads.forward_lstm, d_x);
  backprop_lstm(model.backward_lstm, cache.x, cache.bwd, d_concat.rightCols(h_dim), true,
                grads.backward_lstm, d_x);
  for (Eigen::Index i = 0; i < n; ++i) {
    grads.embeddings.row(cache.token_ids[static_cast<std::size_t>(i)]) += d_x.row(i);
  }
  return loss;
}

std::vector<int> map_tokens(const NeuralModel& model, const TaggedSequence& seq) {
  std::vector<int> ids;
  ids.reserve(seq.size());
  for (const Token& tok : seq.tokens) ids.push_back(model.token_id(tok.text));
  return ids;
}

Eigen::MatrixXd draw_dropout_mask(Eigen::Index n, Eigen::Index width, double rate, Rng& rng) {
  Eigen::MatrixXd mask(n, width);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < width; ++j) {
      mask(i, j) = rng.uniform() < rate ? 0.0 : keep_scale;
    }
  }
  return mask;
}

void fill_uniform(Eigen::MatrixXd& m, double limit, Rng& rng) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rng.uniform(-limit, limit);
    }
  }
}

double glorot_limit(Eigen::Index rows, Eigen::Index cols) {
  return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

void sgd_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, double lr) {
  param -= lr * grad;
}
void sgd_step(Eigen::VectorXd& param, const Eigen::VectorXd& grad, double lr) {
  param -= lr * grad;
}

std::string format_param(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int NeuralModel::token_id(const std::string& text) const {
  auto it = vocab_index.find(text);
  return it == vocab_index.end() ? 0 : it->second;
}

double NeuralGradients::max_abs() const {
  double m = embeddings.cwiseAbs().maxCoeff();
  for (const LstmParams* p : {&forward_lstm, &backward_lstm}) {
    m = std::max(m, p->w_input.cwiseAbs().maxCoeff());
    m = std::max(m, p->w_recurrent.cwiseAbs().maxCoeff());
    m = std::max(m, p->bias.cwiseAbs().maxCoeff());
  }
  m = std::max(m, projection.cwiseAbs().maxCoeff());
  m = std::max(m, projection_bias.cwiseAbs().maxCoeff());
  m = std::max(m, transitions.cwiseAbs().maxCoeff());
  m = std::max(m, bos_transitions.cwiseAbs().maxCoeff());
  m = std::max(m, eos_transitions.cwiseAbs().maxCoeff());
  return m;
}

void NeuralGradients::scale(double factor) {
  embeddings *= factor;
  for (LstmParams* p : {&forward_lstm, &backward_lstm}) {
    p->w_input *= factor;
    p->w_recurrent *= factor;
    p->bias *= factor;
  }
  projection *= factor;
  projection_bias *= factor;
  transitions *= factor;
  bos_transitions *= factor;
  eos_transitions *= factor;
}

double crf_layer_log_z(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& transitions,
                       const Eigen::VectorXd& bos, const Eigen::VectorXd& eos) {
  const Eigen::Index n = scores.rows();
  if (n == 0) throw DataError("crf_layer_log_z: empty score matrix");
  Eigen::VectorXd alpha = bos + scores.row(0).transpose();
  Eigen::VectorXd next(T);
  Eigen::VectorXd scratch(T);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (int c = 0; c < T; ++c) {
      for (int p = 0; p < T; ++p) scratch[p] = alpha[p] + transitions(p, c);
      next[c] = log_sum_exp(scratch) + scores(i, c);
    }
    alpha = next;
  }
  return log_sum_exp((alpha + eos).eval());
}

double crf_layer_path_score(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& transitions,
                            const Eigen::VectorXd& bos, const Eigen::VectorXd& eos,
                            const std::vector<Tag>& tags) {
  const Eigen::Index n = scores.rows();
  if (static_cast<Eigen::Index>(tags.size()) != n) {
    throw DataError("crf_layer_path_score: tag count mismatch");
  }
  double score = bos[static_cast<int>(tags.front())] + eos[static_cast<int>(tags.back())];
  for (Eigen::Index i = 0; i < n; ++i) {
    score += scores(i, static_cast<int>(tags[static_cast<std::size_t>(i)]));
    if (i > 0) score += transitions(static_cast<int>(tags[i - 1]), static_cast<int>(tags[i]));
  }
  return score;
}

double crf_layer_loss_grad(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& transitions,
                           const Eigen::VectorXd& bos, const Eigen::VectorXd& eos,
                           const std::vector<Tag>& tags, Eigen::MatrixXd& d_scores,
                           Eigen::MatrixXd& d_transitions, Eigen::VectorXd& d_bos,
                           Eigen::VectorXd& d_eos) {
  const Eigen::Index n = scores.rows();
  if (static_cast<Eigen::Index>(tags.size()) != n || n == 0) {
    throw DataError("crf_layer_loss_grad: tag count mismatch");
  }

  // Forward and backward tables with BOS/EOS rows folded in.
  Eigen::MatrixXd alpha(n, T), beta(n, T);
  Eigen::VectorXd scratch(T);
  alpha.row(0) = (bos + scores.row(0).transpose()).transpose();
  for (Eigen::Index i = 1; i < n; ++i) {
    for (int c = 0; c < T; ++c) {
      for (int p = 0; p < T; ++p) scratch[p] = alpha(i - 1, p) + transitions(p, c);
      alpha(i, c) = log_sum_exp(scratch) + scores(i, c);
    }
  }
  beta.row(n - 1) = eos.transpose();
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    for (int p = 0; p < T; ++p) {
      for (int c = 0; c < T; ++c) {
        scratch[c] = transitions(p, c) + scores(i + 1, c) + beta(i + 1, c);
      }
      beta(i, p) = log_sum_exp(scratch);
    }
  }
  const double log_z = log_sum_exp((alpha.row(n - 1).transpose() + eos).eval());

  d_scores.resize(n, T);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int t = 0; t < T; ++t) {
      d_scores(i, t) = std::exp(alpha(i, t) + beta(i, t) - log_z);
    }
    d_scores(i, static_cast<int>(tags[static_cast<std::size_t>(i)])) -= 1.0;
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    for (int p = 0; p < T; ++p) {
      for (int c = 0; c < T; ++c) {
        d_transitions(p, c) +=
            std::exp(alpha(i - 1, p) + transitions(p, c) + scores(i, c) + beta(i, c) - log_z);
      }
    }
    d_transitions(static_cast<int>(tags[i - 1]), static_cast<int>(tags[i])) -= 1.0;
  }
  for (int t = 0; t < T; ++t) {
    d_bos[t] += std::exp(alpha(0, t) + beta(0, t) - log_z);
    d_eos[t] += std::exp(alpha(n - 1, t) + eos[t] - log_z);
  }
  d_bos[static_cast<int>(tags.front())] -= 1.0;
  d_eos[static_cast<int>(tags.back())] -= 1.0;

  return log_z - crf_layer_path_score(scores, transitions, bos, eos, tags);
}

std::pair<std::vector<Tag>, double> crf_layer_viterbi(const Eigen::MatrixXd& scores,
                                                      const Eigen::MatrixXd& transitions,
                                                      const Eigen::VectorXd& bos,
                                                      const Eigen::VectorXd& eos) {
  const Eigen::Index n = scores.rows();
  if (n == 0) throw DataError("crf_layer_viterbi: empty score matrix");
  Eigen::MatrixXd best(n, T);
  Eigen::MatrixXi from = Eigen::MatrixXi::Zero(n, T);
  best.row(0) = (bos + scores.row(0).transpose()).transpose();
  for (Eigen::Index i = 1; i < n; ++i) {
    for (int c = 0; c < T; ++c) {
      int arg = 0;
      double top = best(i - 1, 0) + transitions(0, c);
      for (int p = 1; p < T; ++p) {
        const double cand = best(i - 1, p) + transitions(p, c);
        if (cand > top) {
          top = cand;
          arg = p;
        }
      }
      best(i, c) = top + scores(i, c);
      from(i, c) = arg;
    }
  }
  int cur = 0;
  double top = best(n - 1, 0) + eos[0];
  for (int c = 1; c < T; ++c) {
    const double cand = best(n - 1, c) + eos[c];
    if (cand > top) {
      top = cand;
      cur = c;
    }
  }
  std::vector<Tag> tags(static_cast<std::size_t>(n));
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    tags[static_cast<std::size_t>(i)] = static_cast<Tag>(cur);
    if (i > 0) cur = from(i, cur);
  }
  return {std::move(tags), top};
}

NeuralModel nn_init(const Corpus& corpus, const NeuralConfig& config) {
  if (corpus.sequences.empty()) throw DataError("nn_init: empty corpus");
  if (config.embedding_dim < 1 || config.hidden_dim < 1) {
    throw ConfigError("nn_init: dimensions must be at least 1");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ConfigError("nn_init: dropout must be in [0, 1)");
  }
  if (config.clip <= 0.0) throw ConfigError("nn_init: clip must be positive");

  std::map<std::string, std::size_t> counts;  // ordered, so ids are stable
  for (const TaggedSequence& seq : corpus.sequences) {
    for (const Token& tok : seq.tokens) ++counts[tok.text];
  }

  NeuralModel model;
  model.config = config;
  model.vocab.push_back(kUnkToken);
  for (const auto& [text, count] : counts) model.vocab.push_back(text);
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    model.vocab_index[model.vocab[i]] = static_cast<int>(i);
  }

  const Eigen::Index v = static_cast<Eigen::Index>(model.vocab.size());
  const Eigen::Index d = config.embedding_dim;
  const Eigen::Index h = config.hidden_dim;

  Rng rng(config.seed);
  model.embeddings.resize(v, d);
  fill_uniform(model.embeddings, 0.1, rng);
  for (LstmParams* p : {&model.forward_lstm, &model.backward_lstm}) {
    p->w_input.resize(4 * h, d);
    fill_uniform(p->w_input, glorot_limit(4 * h, d), rng);
    p->w_recurrent.resize(4 * h, h);
    fill_uniform(p->w_recurrent, glorot_limit(4 * h, h), rng);
    p->bias = Eigen::VectorXd::Zero(4 * h);
  }
  model.projection.resize(T, 2 * h);
  fill_uniform(model.projection, glorot_limit(T, 2 * h), rng);
  model.projection_bias = Eigen::VectorXd::Zero(T);
  model.transitions = Eigen::MatrixXd::Zero(T, T);
  model.bos_transitions = Eigen::VectorXd::Zero(T);
  model.eos_transitions = Eigen::VectorXd::Zero(T);
  return model;
}

Eigen::MatrixXd nn_forward(const NeuralModel& model, const TaggedSequence& seq, bool train_mode,
                           Rng* rng) {
  const std::vector<int> ids = map_tokens(model, seq);
  if (!train_mode || model.config.dropout == 0.0) {
    return encode(model, ids, nullptr).scores;
  }
  Rng local(model.config.seed);
  Rng& r = rng != nullptr ? *rng : local;
  const Eigen::MatrixXd mask =
      draw_dropout_mask(static_cast<Eigen::Index>(ids.size()),
                        2 * model.forward_lstm.w_recurrent.cols(), model.config.dropout, r);
  return encode(model, ids, &mask).scores;
}

std::pair<double, NeuralGradients> nn_loss_grad(const NeuralModel& model,
                                                const TaggedSequence& seq) {
  if (seq.tags.size() != seq.tokens.size()) {
    throw DataError("nn_loss_grad: sequence must be labeled");
  }
  NeuralGradients grads = zero_gradients(model);
  const double loss = loss_and_backprop(model, map_tokens(model, seq), seq.tags, nullptr, grads);
  return {loss, std::move(grads)};
}

void clip_gradients(NeuralGradients& grads, double max_norm) {
  const double m = grads.max_abs();
  if (m > max_norm) grads.scale(max_norm / m);
}

std::pair<NeuralModel, std::vector<double>> nn_train(const Corpus& corpus,
                                                     const NeuralConfig& config) {
  NeuralModel model = nn_init(corpus, config);
  Rng rng(config.seed + 1);  // distinct stream from the init draws

  // Tokens seen once get stochastically replaced by <UNK> so that it
  // receives training signal.
  std::map<std::string, std::size_t> counts;
  for (const TaggedSequence& seq : corpus.sequences) {
    for (const Token& tok : seq.tokens) ++counts[tok.text];
  }
  std::unordered_set<int> singletons;
  for (const auto& [text, count] : counts) {
    if (count == 1) singletons.insert(model.token_id(text));
  }

  std::vector<std::size_t> order(corpus.sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> epoch_losses;
  const Eigen::Index mask_width = 2 * model.forward_lstm.w_recurrent.cols();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const TaggedSequence& seq = corpus.sequences[idx];
      if (seq.tags.size() != seq.tokens.size()) {
        throw DataError("nn_train: turn " + seq.dialogue_id + "/" + seq.turn_id +
                        " is unlabeled");
      }
      std::vector<int> ids = map_tokens(model, seq);
      for (int& id : ids) {
        if (id != 0 && singletons.count(id) && rng.bernoulli(0.5)) id = 0;
      }
      NeuralGradients grads = zero_gradients(model);
      if (config.dropout > 0.0) {
        const Eigen::MatrixXd mask = draw_dropout_mask(static_cast<Eigen::Index>(ids.size()),
                                                       mask_width, config.dropout, rng);
        epoch_loss += loss_and_backprop(model, ids, seq.tags, &mask, grads);
      } else {
        epoch_loss += loss_and_backprop(model, ids, seq.tags, nullptr, grads);
      }
      clip_gradients(grads, config.clip);

      const double lr = config.learning_rate;
      sgd_step(model.embeddings, grads.embeddings, lr);
      sgd_step(model.forward_lstm.w_input, grads.forward_lstm.w_input, lr);
      sgd_step(model.forward_lstm.w_recurrent, grads.forward_lstm.w_recurrent, lr);
      sgd_step(model.forward_lstm.bias, grads.forward_lstm.bias, lr);
      sgd_step(model.backward_lstm.w_input, grads.backward_lstm.w_input, lr);
      sgd_step(model.backward_lstm.w_recurrent, grads.backward_lstm.w_recurrent, lr);
      sgd_step(model.backward_lstm.bias, grads.backward_lstm.bias, lr);
      sgd_step(model.projection, grads.projection, lr);
      sgd_step(model.projection_bias, grads.projection_bias, lr);
      sgd_step(model.transitions, grads.transitions, lr);
      sgd_step(model.bos_transitions, grads.bos_transitions, lr);
      sgd_step(model.eos_transitions, grads.eos_transitions, lr);
    }
    epoch_losses.push_back(epoch_loss);
  }
  return {std::move(model), std::move(epoch_losses)};
}

std::vector<Tag> nn_decode(const NeuralModel& model, const TaggedSequence& seq) {
  const Eigen::MatrixXd scores = nn_forward(model, seq, false);
  return crf_layer_viterbi(scores, model.transitions, model.bos_transitions,
                           model.eos_transitions)
      .first;
}

void save_neural_model(const NeuralModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file " + path.string());
  out << kNeuralModelMagic << "\n";
  out << "embedding_dim=" << model.config.embedding_dim << "\n";
  out << "hidden_dim=" << model.config.hidden_dim << "\n";
  out << "dropout=" << format_param(model.config.dropout) << "\n";
  out << "learning_rate=" << format_param(model.config.learning_rate) << "\n";
  out << "clip=" << format_param(model.config.clip) << "\n";
  out << "epochs=" << model.config.epochs << "\n";
  out << "seed=" << model.config.seed << "\n";
  out << "vocab_size=" << model.vocab.size() << "\n";
  for (const std::string& token : model.vocab) out << token << "\n";

  auto write_block = [&](const char* name, const Eigen::MatrixXd& m) {
    out << "param " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j) out << " ";
        out << format_param(m(i, j));
      }
      out << "\n";
    }
  };
  write_block("embeddings", model.embeddings);
  write_block("forward_w_input", model.forward_lstm.w_input);
  write_block("forward_w_recurrent", model.forward_lstm.w_recurrent);
  write_block("forward_bias", model.forward_lstm.bias);
  write_block("backward_w_input", model.backward_lstm.w_input);
  write_block("backward_w_recurrent", model.backward_lstm.w_recurrent);
  write_block("backward_bias", model.backward_lstm.bias);
  write_block("projection", model.projection);
  write_block("projection_bias", model.projection_bias);
  write_block("transitions", model.transitions);
  write_block("bos_transitions", model.bos_transitions);
  write_block("eos_transitions", model.eos_transitions);
  if (!out) throw Error("failed writing model file " + path.string());
}

NeuralModel load_neural_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file " + path.string());
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw ParseError(path.string() + ": truncated neural model");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != kNeuralModelMagic) {
    throw ParseError(path.string() + ": not a neural model file");
  }
  auto header = [&](const std::string& key) {
    next_line();
    if (line.rfind(key + "=", 0) != 0) {
      throw ParseError(path.string() + ": expected header '" + key + "='");
    }
    return line.substr(key.size() + 1);
  };

  NeuralModel model;
  model.config.embedding_dim = std::stoi(header("embedding_dim"));
  model.config.hidden_dim = std::stoi(header("hidden_dim"));
  model.config.dropout = std::stod(header("dropout"));
  model.config.learning_rate = std::stod(header("learning_rate"));
  model.config.clip = std::stod(header("clip"));
  model.config.epochs = std::stoi(header("epochs"));
  model.config.seed = std::stoull(header("seed"));
  const std::size_t vocab_size = std::stoul(header("vocab_size"));
  for (std::size_t i = 0; i < vocab_size; ++i) {
    model.vocab.push_back(next_line());
    model.vocab_index[model.vocab.back()] = static_cast<int>(i);
  }
  if (model.vocab.empty() || model.vocab[0] != kUnkToken) {
    throw ParseError(path.string() + ": vocabulary must start with " + std::string(kUnkToken));
  }

  auto read_block = [&](const char* name) {
    next_line();
    char parsed[64];
    long rows = 0, cols = 0;
    if (std::sscanf(line.c_str(), "param %63s %ld %ld", parsed, &rows, &cols) != 3 ||
        std::string(parsed) != name) {
      throw ParseError(path.string() + ": expected block '" + name + "', got '" + line + "'");
    }
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < rows; ++i) {
      next_line();
      const char* p = line.c_str();
      char* end = nullptr;
      for (long j = 0; j < cols; ++j) {
        m(i, j) = std::strtod(p, &end);
        if (end == p) throw ParseError(path.string() + ": short row in block '" + name + "'");
        p = end;
      }
    }
    return m;
  };
  model.embeddings = read_block("embeddings");
  model.forward_lstm.w_input = read_block("forward_w_input");
  model.forward_lstm.w_recurrent = read_block("forward_w_recurrent");
  model.forward_lstm.bias = read_block("forward_bias");
  model.backward_lstm.w_input = read_block("backward_w_input");
  model.backward_lstm.w_recurrent = read_block("backward_w_recurrent");
  model.backward_lstm.bias = read_block("backward_bias");
  model.projection = read_block("projection");
  model.projection_bias = read_block("projection_bias");
  model.transitions = read_block("transitions");
  model.bos_transitions = read_block("bos_transitions");
  model.eos_transitions = read_block("eos_transitions");
  return model;
}

}  // namespace fsseg
