#include "fsseg/maxent.hpp"

#include <cmath>

#include "fsseg/errors.hpp"
#include "fsseg/optim.hpp"

namespace fsseg {

namespace {

std::array<double, kNumTags> scores_for(const Eigen::VectorXd& weights, const SparseVector& x) {
  std::array<double, kNumTags> scores{};
  for (int id : x.ids) {
    for (int t = 0; t < kNumTags; ++t) {
      scores[t] += weights[static_cast<Eigen::Index>(id) * kNumTags + t];
    }
  }
  return scores;
}

std::array<double, kNumTags> softmax(const std::array<double, kNumTags>& scores) {
  const double m = std::max(scores[0], scores[1]);
  std::array<double, kNumTags> p{};
  double z = 0.0;
  for (int t = 0; t < kNumTags; ++t) {
    p[t] = std::exp(scores[t] - m);
    z += p[t];
  }
  for (int t = 0; t < kNumTags; ++t) p[t] /= z;
  return p;
}

}  // namespace

std::array<double, kNumTags> me_probability(const MaxEntModel& model, const SparseVector& x) {
  return softmax(scores_for(model.emission, x));
}

namespace {

struct MePosition {
  SparseVector input;
  int gold;
};

std::vector<MePosition> cache_positions(const Corpus& corpus, const FeatureVocabulary& vocab,
                                        const std::vector<FeatureTemplate>& templates,
                                        bool use_msg_boundary) {
  std::vector<MePosition> positions;
  for (const TaggedSequence& seq : corpus.sequences) {
    if (seq.tags.size() != seq.tokens.size()) {
      throw DataError("maxent: turn " + seq.dialogue_id + "/" + seq.turn_id +
                      " is unlabeled or has a tag/token length mismatch");
    }
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      positions.push_back({vectorize(seq, pos, vocab, templates, use_msg_boundary),
                           static_cast<int>(seq.tags[pos])});
    }
  }
  return positions;
}

double positions_loglik_grad(const std::vector<MePosition>& positions,
                             const Eigen::VectorXd& weights, double l2_sigma,
                             Eigen::VectorXd& grad) {
  grad.setZero();
  double value = 0.0;
  for (const MePosition& p : positions) {
    const auto prob = softmax(scores_for(weights, p.input));
    value -= std::log(prob[static_cast<std::size_t>(p.gold)]);
    for (int id : p.input.ids) {
      for (int t = 0; t < kNumTags; ++t) {
        grad[static_cast<Eigen::Index>(id) * kNumTags + t] +=
            prob[static_cast<std::size_t>(t)] - (t == p.gold ? 1.0 : 0.0);
      }
    }
  }
  const double inv_sigma2 = 1.0 / (l2_sigma * l2_sigma);
  value += 0.5 * inv_sigma2 * weights.squaredNorm();
  grad += inv_sigma2 * weights;
  return value;
}

}  // namespace

std::pair<double, Eigen::VectorXd> me_loglik_grad(const MaxEntModel& model, const Corpus& corpus) {
  const std::vector<MePosition> positions =
      cache_positions(corpus, model.vocab, model.templates, model.use_msg_boundary);
  Eigen::VectorXd grad(model.emission.size());
  const double value = positions_loglik_grad(positions, model.emission, model.l2_sigma, grad);
  return {value, std::move(grad)};
}

std::pair<MaxEntModel, OptimizationTrace> me_train(const Corpus& corpus,
                                                   const TrainOptions& options) {
  if (corpus.sequences.empty()) throw DataError("me_train: empty corpus");
  if (options.l2_sigma <= 0.0) throw ConfigError("me_train: l2_sigma must be positive");

  MaxEntModel model;
  model.model_type = "maxent";
  model.markov_order = 0;
  model.templates = options.templates;
  model.use_msg_boundary = options.use_msg_boundary;
  model.cutoff = options.cutoff;
  model.l2_sigma = options.l2_sigma;
  model.vocab =
      build_vocabulary(corpus, options.templates, options.cutoff, options.use_msg_boundary);

  // The training positions do not change across iterations.
  const std::vector<MePosition> positions =
      cache_positions(corpus, model.vocab, options.templates, options.use_msg_boundary);
  ObjectiveFunction objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
    return positions_loglik_grad(positions, w, options.l2_sigma, grad);
  };

  const Eigen::Index dim = static_cast<Eigen::Index>(model.vocab.size()) * kNumTags;
  MinimizeResult result = minimize(objective, Eigen::VectorXd::Zero(dim), options.optimizer);
  model.emission = std::move(result.x);
  model.transition.resize(0);
  return {std::move(model), std::move(result.trace)};
}

std::vector<Tag> me_decode(const MaxEntModel& model, const TaggedSequence& seq) {
  std::vector<Tag> tags;
  tags.reserve(seq.size());
  for (std::size_t pos = 0; pos < seq.size(); ++pos) {
    const SparseVector x =
        vectorize(seq, pos, model.vocab, model.templates, model.use_msg_boundary);
    const auto p = me_probability(model, x);
    tags.push_back(p[0] >= p[1] ? Tag::BFs : Tag::IFs);
  }
  return tags;
}

}  // namespace fsseg
