#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "fsseg/features.hpp"
#include "fsseg/optim.hpp"

namespace fsseg {

inline constexpr const char* kWeightedModelMagic = "fsseg-model v1";
inline constexpr const char* kNeuralModelMagic = "fsseg-neural v1";
inline constexpr const char* kTransitionPrefix = "__T__";

// Feature-string -> weight table plus tagset/order metadata, shared by the
// maximum-entropy and CRF taggers. Emission weights are indexed
// feature_id * kNumTags + tag; transition weights by the tag context, most
// recent tag last (empty for maxent).
struct WeightedModel {
  std::string model_type;  // "maxent" or "crf"
  int markov_order = 0;    // 0 for maxent, 1 or 2 for crf
  std::vector<FeatureTemplate> templates;
  bool use_msg_boundary = false;
  std::size_t cutoff = 1;
  double l2_sigma = 1.0;
  FeatureVocabulary vocab;
  Eigen::VectorXd emission;
  Eigen::VectorXd transition;
};

// The two taggers share the WeightedModel representation; the aliases mark
// intent at API boundaries.
using MaxEntModel = WeightedModel;
using CrfModel = WeightedModel;

// Training knobs shared by both linear models. markov_order applies to the
// CRF only.
struct TrainOptions {
  std::vector<FeatureTemplate> templates = default_templates();
  std::size_t cutoff = 1;
  bool use_msg_boundary = false;
  double l2_sigma = 1.0;
  int markov_order = 2;
  OptimizerConfig optimizer;
};

// Number of transition parameters: kNumTags^(order+1).
std::size_t transition_table_size(int markov_order);

// Flat index of a transition context (oldest tag first, current tag last).
std::size_t transition_index(const std::vector<Tag>& context);

void save_model(const WeightedModel& model, const std::filesystem::path& path);
WeightedModel load_model(const std::filesystem::path& path);

// First line of a model file: "maxent", "crf" or "bilstm-crf".
std::string peek_model_type(const std::filesystem::path& path);

}  // namespace fsseg
