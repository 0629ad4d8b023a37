#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "fsseg/corpus.hpp"
#include "fsseg/model_io.hpp"

namespace fsseg {

// Composite-state lattice over one sequence. Order 2 runs a first-order
// recursion over tag pairs: row 0 of alpha/beta uses plain tag indices in
// the first kNumTags columns (start-of-sequence pairs with a BOS
// placeholder, which carries no weight); later rows use prev * kNumTags +
// cur. The tag of composite state s is s % kNumTags everywhere.
struct Lattice {
  int order = 1;
  Eigen::MatrixXd emissions;    // n x kNumTags log-potentials
  Eigen::MatrixXd alpha, beta;  // n x S forward/backward tables, log space
  double log_z_alpha = 0.0;
  double log_z_beta = 0.0;

  Eigen::Index length() const { return emissions.rows(); }
  Eigen::Index states() const { return alpha.cols(); }

  // exp(alpha + beta - log Z): composite-state marginals, rows sum to 1.
  Eigen::MatrixXd posterior() const;
  // Marginals collapsed onto the current tag.
  Eigen::MatrixXd tag_marginals() const;
};

// Model-free lattice math over injected log-potentials; also used to
// cross-check the neural CRF layer. transition is indexed with the oldest
// tag most significant (see transition_index).
Lattice build_lattice(const Eigen::MatrixXd& emissions, const Eigen::VectorXd& transition,
                      int order);

// Unnormalized log score of one tag path under the injected potentials.
double path_score(const Eigen::MatrixXd& emissions, const Eigen::VectorXd& transition, int order,
                  const std::vector<Tag>& tags);

// Max-product decoding; ties prefer the lower composite-state index, so the
// all-ties case decodes to all B-fs.
std::pair<std::vector<Tag>, double> viterbi_decode(const Eigen::MatrixXd& emissions,
                                                   const Eigen::VectorXd& transition, int order);

// Token-level log-potentials under the model's emission weights.
Eigen::MatrixXd crf_emissions(const CrfModel& model, const TaggedSequence& seq);

std::pair<double, Lattice> crf_log_partition(const CrfModel& model, const TaggedSequence& seq);

// Penalized negative log-likelihood of the labeled corpus and its gradient
// (emission block first, transition block appended).
std::pair<double, Eigen::VectorXd> crf_loglik_grad(const CrfModel& model, const Corpus& corpus);

std::pair<CrfModel, OptimizationTrace> crf_train(const Corpus& corpus,
                                                 const TrainOptions& options);

std::pair<std::vector<Tag>, double> crf_decode(const CrfModel& model, const TaggedSequence& seq);

}  // namespace fsseg
