#include "fsseg/crf.hpp"

#include <cmath>

#include "fsseg/errors.hpp"
#include "fsseg/numeric.hpp"
#include "fsseg/optim.hpp"

namespace fsseg {

namespace {

constexpr int T = kNumTags;

inline double tr1(const Eigen::VectorXd& w, int prev, int cur) { return w[prev * T + cur]; }
inline double tr2(const Eigen::VectorXd& w, int a, int b, int c) {
  return w[(a * T + b) * T + c];
}

void check_order(int order) {
  if (order != 1 && order != 2) throw ConfigError("markov order must be 1 or 2");
}

struct CachedSequence {
  std::vector<SparseVector> inputs;
  std::vector<Tag> tags;
};

std::vector<CachedSequence> cache_corpus(const Corpus& corpus, const FeatureVocabulary& vocab,
                                         const std::vector<FeatureTemplate>& templates,
                                         bool use_msg_boundary) {
  std::vector<CachedSequence> cached;
  cached.reserve(corpus.sequences.size());
  for (const TaggedSequence& seq : corpus.sequences) {
    if (seq.tags.size() != seq.tokens.size()) {
      throw DataError("crf: turn " + seq.dialogue_id + "/" + seq.turn_id +
                      " is unlabeled or has a tag/token length mismatch");
    }
    CachedSequence c;
    c.tags = seq.tags;
    c.inputs.reserve(seq.size());
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      c.inputs.push_back(vectorize(seq, pos, vocab, templates, use_msg_boundary));
    }
    cached.push_back(std::move(c));
  }
  return cached;
}

Eigen::MatrixXd emissions_from_inputs(const std::vector<SparseVector>& inputs,
                                      const Eigen::VectorXd& emission_weights) {
  Eigen::MatrixXd em = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(inputs.size()), T);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (int id : inputs[i].ids) {
      for (int t = 0; t < T; ++t) {
        em(static_cast<Eigen::Index>(i), t) += emission_weights[id * T + t];
      }
    }
  }
  return em;
}

// Negative log-likelihood of one sequence plus its gradient contribution.
// grad_emission has K*T entries, grad_transition the full table.
double sequence_loglik_grad(const CachedSequence& seq, const Eigen::VectorXd& emission_weights,
                            const Eigen::VectorXd& transition, int order,
                            Eigen::VectorXd& grad_emission, Eigen::VectorXd& grad_transition) {
  const Eigen::MatrixXd em = emissions_from_inputs(seq.inputs, emission_weights);
  const Lattice lattice = build_lattice(em, transition, order);
  const double log_z = lattice.log_z_alpha;
  const Eigen::Index n = lattice.length();

  // Emission block: posterior tag marginals minus empirical counts.
  const Eigen::MatrixXd marginals = lattice.tag_marginals();
  for (Eigen::Index i = 0; i < n; ++i) {
    const int gold = static_cast<int>(seq.tags[static_cast<std::size_t>(i)]);
    for (int id : seq.inputs[static_cast<std::size_t>(i)].ids) {
      for (int t = 0; t < T; ++t) {
        grad_emission[id * T + t] += marginals(i, t) - (t == gold ? 1.0 : 0.0);
      }
    }
  }

  // Transition block: pair/triple posteriors minus empirical counts.
  if (order == 1) {
    for (Eigen::Index i = 1; i < n; ++i) {
      for (int p = 0; p < T; ++p) {
        for (int c = 0; c < T; ++c) {
          grad_transition[p * T + c] += std::exp(lattice.alpha(i - 1, p) + tr1(transition, p, c) +
                                                 em(i, c) + lattice.beta(i, c) - log_z);
        }
      }
      grad_transition[static_cast<int>(seq.tags[i - 1]) * T + static_cast<int>(seq.tags[i])] -=
          1.0;
    }
  } else {
    for (Eigen::Index i = 2; i < n; ++i) {
      for (int a = 0; a < T; ++a) {
        for (int b = 0; b < T; ++b) {
          for (int c = 0; c < T; ++c) {
            grad_transition[(a * T + b) * T + c] +=
                std::exp(lattice.alpha(i - 1, a * T + b) + tr2(transition, a, b, c) + em(i, c) +
                         lattice.beta(i, b * T + c) - log_z);
          }
        }
      }
      grad_transition[(static_cast<int>(seq.tags[i - 2]) * T + static_cast<int>(seq.tags[i - 1])) *
                          T +
                      static_cast<int>(seq.tags[i])] -= 1.0;
    }
  }

  return log_z - path_score(em, transition, order, seq.tags);
}

}  // namespace

Eigen::MatrixXd Lattice::posterior() const {
  Eigen::MatrixXd post = alpha + beta;
  post.array() -= log_z_alpha;
  return post.array().exp();
}

Eigen::MatrixXd Lattice::tag_marginals() const {
  const Eigen::MatrixXd post = posterior();
  Eigen::MatrixXd marginals = Eigen::MatrixXd::Zero(post.rows(), T);
  for (Eigen::Index i = 0; i < post.rows(); ++i) {
    for (Eigen::Index s = 0; s < post.cols(); ++s) {
      marginals(i, s % T) += post(i, s);
    }
  }
  return marginals;
}

Lattice build_lattice(const Eigen::MatrixXd& emissions, const Eigen::VectorXd& transition,
                      int order) {
  check_order(order);
  const Eigen::Index n = emissions.rows();
  if (n == 0) throw DataError("build_lattice: empty sequence");
  if (emissions.cols() != T) throw DataError("build_lattice: emissions must have one column per tag");
  if (transition.size() != static_cast<Eigen::Index>(transition_table_size(order))) {
    throw DataError("build_lattice: transition table size mismatch");
  }

  Lattice lat;
  lat.order = order;
  lat.emissions = emissions;
  const Eigen::Index S = order == 1 ? T : T * T;
  lat.alpha = Eigen::MatrixXd::Constant(n, S, kNegInf);
  lat.beta = Eigen::MatrixXd::Constant(n, S, kNegInf);

  if (order == 1) {
    lat.alpha.row(0) = emissions.row(0);
    Eigen::Vector2d scratch;
    for (Eigen::Index i = 1; i < n; ++i) {
      for (int c = 0; c < T; ++c) {
        for (int p = 0; p < T; ++p) scratch[p] = lat.alpha(i - 1, p) + tr1(transition, p, c);
        lat.alpha(i, c) = log_sum_exp(scratch) + emissions(i, c);
      }
    }
    lat.log_z_alpha = log_sum_exp(lat.alpha.row(n - 1));

    lat.beta.row(n - 1).setZero();
    for (Eigen::Index i = n - 2; i >= 0; --i) {
      for (int p = 0; p < T; ++p) {
        for (int c = 0; c < T; ++c) {
          scratch[c] = tr1(transition, p, c) + emissions(i + 1, c) + lat.beta(i + 1, c);
        }
        lat.beta(i, p) = log_sum_exp(scratch);
      }
    }
    Eigen::Vector2d first;
    for (int y = 0; y < T; ++y) first[y] = emissions(0, y) + lat.beta(0, y);
    lat.log_z_beta = log_sum_exp(first);
    return lat;
  }

  // Order 2. Row 0 uses plain tag indices in the first T columns.
  for (int y = 0; y < T; ++y) lat.alpha(0, y) = emissions(0, y);
  if (n == 1) {
    lat.log_z_alpha = log_sum_exp(lat.alpha.row(0).head(T));
    for (int y = 0; y < T; ++y) lat.beta(0, y) = 0.0;
    lat.log_z_beta = lat.log_z_alpha;
    return lat;
  }

  for (int p = 0; p < T; ++p) {
    for (int c = 0; c < T; ++c) {
      lat.alpha(1, p * T + c) = lat.alpha(0, p) + emissions(1, c);
    }
  }
  Eigen::Vector2d scratch;
  for (Eigen::Index i = 2; i < n; ++i) {
    for (int b = 0; b < T; ++b) {
      for (int c = 0; c < T; ++c) {
        for (int a = 0; a < T; ++a) {
          scratch[a] = lat.alpha(i - 1, a * T + b) + tr2(transition, a, b, c);
        }
        lat.alpha(i, b * T + c) = log_sum_exp(scratch) + emissions(i, c);
      }
    }
  }
  lat.log_z_alpha = log_sum_exp(lat.alpha.row(n - 1));

  lat.beta.row(n - 1).setZero();
  for (Eigen::Index i = n - 2; i >= 1; --i) {
    for (int a = 0; a < T; ++a) {
      for (int b = 0; b < T; ++b) {
        for (int c = 0; c < T; ++c) {
          scratch[c] = tr2(transition, a, b, c) + emissions(i + 1, c) + lat.beta(i + 1, b * T + c);
        }
        lat.beta(i, a * T + b) = log_sum_exp(scratch);
      }
    }
  }
  for (int y = 0; y < T; ++y) {
    for (int c = 0; c < T; ++c) {
      // BOS placeholder pairs carry no transition weight.
      scratch[c] = emissions(1, c) + lat.beta(1, y * T + c);
    }
    lat.beta(0, y) = log_sum_exp(scratch);
  }
  Eigen::Vector2d first;
  for (int y = 0; y < T; ++y) first[y] = emissions(0, y) + lat.beta(0, y);
  lat.log_z_beta = log_sum_exp(first);
  return lat;
}

double path_score(const Eigen::MatrixXd& emissions, const Eigen::VectorXd& transition, int order,
                  const std::vector<Tag>& tags) {
  check_order(order);
  const Eigen::Index n = emissions.rows();
  if (static_cast<Eigen::Index>(tags.size()) != n) {
    throw DataError("path_score: tag count does not match the lattice length");
  }
  double score = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    score += emissions(i, static_cast<int>(tags[static_cast<std::size_t>(i)]));
  }
  if (order == 1) {
    for (Eigen::Index i = 1; i < n; ++i) {
      score += tr1(transition, static_cast<int>(tags[i - 1]), static_cast<int>(tags[i]));
    }
  } else {
    for (Eigen::Index i = 2; i < n; ++i) {
      score += tr2(transition, static_cast<int>(tags[i - 2]), static_cast<int>(tags[i - 1]),
                   static_cast<int>(tags[i]));
    }
  }
  return score;
}

std::pair<std::vector<Tag>, double> viterbi_decode(const Eigen::MatrixXd& emissions,
                                                   const Eigen::VectorXd& transition, int order) {
  check_order(order);
  const Eigen::Index n = emissions.rows();
  if (n == 0) throw DataError("viterbi_decode: empty sequence");

  if (order == 1) {
    Eigen::MatrixXd best = Eigen::MatrixXd::Constant(n, T, kNegInf);
    Eigen::MatrixXi from(n, T);
    best.row(0) = emissions.row(0);
    for (Eigen::Index i = 1; i < n; ++i) {
      for (int c = 0; c < T; ++c) {
        int arg = 0;
        double top = best(i - 1, 0) + tr1(transition, 0, c);
        for (int p = 1; p < T; ++p) {
          const double cand = best(i - 1, p) + tr1(transition, p, c);
          if (cand > top) {
            top = cand;
            arg = p;
          }
        }
        best(i, c) = top + emissions(i, c);
        from(i, c) = arg;
      }
    }
    int cur = 0;
    for (int c = 1; c < T; ++c) {
      if (best(n - 1, c) > best(n - 1, cur)) cur = c;
    }
    std::vector<Tag> tags(static_cast<std::size_t>(n));
    const double score = best(n - 1, cur);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      tags[static_cast<std::size_t>(i)] = static_cast<Tag>(cur);
      if (i > 0) cur = from(i, cur);
    }
    return {std::move(tags), score};
  }

  // Order 2 over composite states.
  if (n == 1) {
    int arg = 0;
    for (int y = 1; y < T; ++y) {
      if (emissions(0, y) > emissions(0, arg)) arg = y;
    }
    return {{static_cast<Tag>(arg)}, emissions(0, arg)};
  }
  const Eigen::Index S = T * T;
  Eigen::MatrixXd best = Eigen::MatrixXd::Constant(n, S, kNegInf);
  Eigen::MatrixXi from = Eigen::MatrixXi::Zero(n, S);
  for (int p = 0; p < T; ++p) {
    for (int c = 0; c < T; ++c) {
      best(1, p * T + c) = emissions(0, p) + emissions(1, c);
    }
  }
  for (Eigen::Index i = 2; i < n; ++i) {
    for (int b = 0; b < T; ++b) {
      for (int c = 0; c < T; ++c) {
        int arg = 0;
        double top = best(i - 1, 0 * T + b) + tr2(transition, 0, b, c);
        for (int a = 1; a < T; ++a) {
          const double cand = best(i - 1, a * T + b) + tr2(transition, a, b, c);
          if (cand > top) {
            top = cand;
            arg = a;
          }
        }
        best(i, b * T + c) = top + emissions(i, c);
        from(i, b * T + c) = arg;
      }
    }
  }
  int state = 0;
  for (int s = 1; s < S; ++s) {
    if (best(n - 1, s) > best(n - 1, state)) state = s;
  }
  const double score = best(n - 1, state);
  std::vector<Tag> tags(static_cast<std::size_t>(n));
  int b = state / T;
  int c = state % T;
  tags[static_cast<std::size_t>(n - 1)] = static_cast<Tag>(c);
  tags[static_cast<std::size_t>(n - 2)] = static_cast<Tag>(b);
  for (Eigen::Index i = n - 1; i >= 2; --i) {
    const int a = from(i, b * T + c);
    tags[static_cast<std::size_t>(i - 2)] = static_cast<Tag>(a);
    c = b;
    b = a;
  }
  return {std::move(tags), score};
}

Eigen::MatrixXd crf_emissions(const CrfModel& model, const TaggedSequence& seq) {
  std::vector<SparseVector> inputs;
  inputs.reserve(seq.size());
  for (std::size_t pos = 0; pos < seq.size(); ++pos) {
    inputs.push_back(vectorize(seq, pos, model.vocab, model.templates, model.use_msg_boundary));
  }
  return emissions_from_inputs(inputs, model.emission);
}

std::pair<double, Lattice> crf_log_partition(const CrfModel& model, const TaggedSequence& seq) {
  if (seq.tokens.empty()) throw DataError("crf_log_partition: empty sequence");
  Lattice lattice = build_lattice(crf_emissions(model, seq), model.transition, model.markov_order);
  const double log_z = lattice.log_z_alpha;
  return {log_z, std::move(lattice)};
}

std::pair<double, Eigen::VectorXd> crf_loglik_grad(const CrfModel& model, const Corpus& corpus) {
  check_order(model.markov_order);
  const Eigen::Index k_emission = model.emission.size();
  const Eigen::Index k_transition = model.transition.size();
  const std::vector<CachedSequence> cached =
      cache_corpus(corpus, model.vocab, model.templates, model.use_msg_boundary);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(k_emission + k_transition);
  Eigen::VectorXd grad_emission = Eigen::VectorXd::Zero(k_emission);
  Eigen::VectorXd grad_transition = Eigen::VectorXd::Zero(k_transition);
  double value = 0.0;
  for (const CachedSequence& seq : cached) {
    value += sequence_loglik_grad(seq, model.emission, model.transition, model.markov_order,
                                  grad_emission, grad_transition);
  }
  const double inv_sigma2 = 1.0 / (model.l2_sigma * model.l2_sigma);
  value += 0.5 * inv_sigma2 * (model.emission.squaredNorm() + model.transition.squaredNorm());
  grad.head(k_emission) = grad_emission + inv_sigma2 * model.emission;
  grad.tail(k_transition) = grad_transition + inv_sigma2 * model.transition;
  return {value, std::move(grad)};
}

std::pair<CrfModel, OptimizationTrace> crf_train(const Corpus& corpus,
                                                 const TrainOptions& options) {
  if (corpus.sequences.empty()) throw DataError("crf_train: empty corpus");
  if (options.l2_sigma <= 0.0) throw ConfigError("crf_train: l2_sigma must be positive");
  check_order(options.markov_order);

  CrfModel model;
  model.model_type = "crf";
  model.markov_order = options.markov_order;
  model.templates = options.templates;
  model.use_msg_boundary = options.use_msg_boundary;
  model.cutoff = options.cutoff;
  model.l2_sigma = options.l2_sigma;
  model.vocab =
      build_vocabulary(corpus, options.templates, options.cutoff, options.use_msg_boundary);

  const std::vector<CachedSequence> cached =
      cache_corpus(corpus, model.vocab, options.templates, options.use_msg_boundary);
  const Eigen::Index k_emission = static_cast<Eigen::Index>(model.vocab.size()) * T;
  const Eigen::Index k_transition =
      static_cast<Eigen::Index>(transition_table_size(options.markov_order));
  const double inv_sigma2 = 1.0 / (options.l2_sigma * options.l2_sigma);

  ObjectiveFunction objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
    grad.setZero();
    const Eigen::VectorXd emission = w.head(k_emission);
    const Eigen::VectorXd transition = w.tail(k_transition);
    Eigen::VectorXd grad_emission = Eigen::VectorXd::Zero(k_emission);
    Eigen::VectorXd grad_transition = Eigen::VectorXd::Zero(k_transition);
    double value = 0.0;
    for (const CachedSequence& seq : cached) {
      value += sequence_loglik_grad(seq, emission, transition, options.markov_order,
                                    grad_emission, grad_transition);
    }
    value += 0.5 * inv_sigma2 * w.squaredNorm();
    grad.head(k_emission) = grad_emission;
    grad.tail(k_transition) = grad_transition;
    grad += inv_sigma2 * w;
    return value;
  };

  MinimizeResult result =
      minimize(objective, Eigen::VectorXd::Zero(k_emission + k_transition), options.optimizer);
  model.emission = result.x.head(k_emission);
  model.transition = result.x.tail(k_transition);
  return {std::move(model), std::move(result.trace)};
}

std::pair<std::vector<Tag>, double> crf_decode(const CrfModel& model, const TaggedSequence& seq) {
  if (seq.tokens.empty()) throw DataError("crf_decode: empty sequence");
  return viterbi_decode(crf_emissions(model, seq), model.transition, model.markov_order);
}

}  // namespace fsseg
