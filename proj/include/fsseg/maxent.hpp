#pragma once

#include <array>
#include <utility>
#include <vector>

#include "fsseg/corpus.hpp"
#include "fsseg/model_io.hpp"

namespace fsseg {

// P(y|x) = exp(score_y) / sum_y' exp(score_y'), computed with max
// subtraction. score_y sums the weights of the active features for tag y.
std::array<double, kNumTags> me_probability(const MaxEntModel& model, const SparseVector& x);

// Penalized per-token negative log-likelihood of the labeled corpus and its
// gradient under the model's weights.
std::pair<double, Eigen::VectorXd> me_loglik_grad(const MaxEntModel& model, const Corpus& corpus);

// Minimizes the L2-penalized per-token negative log-likelihood with L-BFGS.
std::pair<MaxEntModel, OptimizationTrace> me_train(const Corpus& corpus,
                                                   const TrainOptions& options);

// Per-position argmax; ties go to the earlier tag in the tagset (B-fs).
// Existing labels on the sequence are ignored.
std::vector<Tag> me_decode(const MaxEntModel& model, const TaggedSequence& seq);

}  // namespace fsseg
