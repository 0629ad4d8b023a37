#include "fsseg/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fsseg/errors.hpp"
#include "fsseg/text.hpp"

namespace fsseg {

namespace {

std::string format_weight(double w) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", w);
  return buf;
}

// Context tags of transition index i, oldest first.
std::vector<Tag> transition_context(std::size_t index, int markov_order) {
  std::vector<Tag> context(static_cast<std::size_t>(markov_order) + 1);
  for (std::size_t k = context.size(); k-- > 0;) {
    context[k] = static_cast<Tag>(index % kNumTags);
    index /= kNumTags;
  }
  return context;
}

void expect_header(std::ifstream& in, const std::filesystem::path& path, const std::string& key,
                   std::string& value) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": truncated model header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind(key + "=", 0) != 0) {
    throw ParseError(path.string() + ": expected header '" + key + "=...', got '" + line + "'");
  }
  value = line.substr(key.size() + 1);
}

}  // namespace

std::size_t transition_table_size(int markov_order) {
  std::size_t size = 1;
  for (int i = 0; i <= markov_order; ++i) size *= kNumTags;
  return size;
}

std::size_t transition_index(const std::vector<Tag>& context) {
  std::size_t index = 0;
  for (Tag t : context) index = index * kNumTags + static_cast<std::size_t>(t);
  return index;
}

void save_model(const WeightedModel& model, const std::filesystem::path& path) {
  const std::size_t K = model.vocab.size();
  if (model.emission.size() != static_cast<Eigen::Index>(K * kNumTags)) {
    throw DataError("save_model: emission weight length does not match the vocabulary");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file " + path.string());

  out << kWeightedModelMagic << "\n";
  out << "model_type=" << model.model_type << "\n";
  out << "markov_order=" << model.markov_order << "\n";
  out << "tagset=" << tag_name(Tag::BFs) << "," << tag_name(Tag::IFs) << "\n";
  out << "templates=" << templates_to_string(model.templates) << "\n";
  out << "use_msg_boundary=" << (model.use_msg_boundary ? 1 : 0) << "\n";
  out << "cutoff=" << model.cutoff << "\n";
  out << "l2_sigma=" << format_weight(model.l2_sigma) << "\n";

  for (std::size_t f = 0; f < K; ++f) {
    const std::string& name = model.vocab.string_of(static_cast<int>(f));
    for (int t = 0; t < kNumTags; ++t) {
      out << name << "\t" << tag_name(static_cast<Tag>(t)) << "\t"
          << format_weight(model.emission[static_cast<Eigen::Index>(f * kNumTags + t)]) << "\n";
    }
  }
  if (model.model_type == "crf") {
    const std::size_t table = transition_table_size(model.markov_order);
    if (model.transition.size() != static_cast<Eigen::Index>(table)) {
      throw DataError("save_model: transition table size mismatch");
    }
    for (std::size_t i = 0; i < table; ++i) {
      const std::vector<Tag> context = transition_context(i, model.markov_order);
      std::string name = kTransitionPrefix;
      for (std::size_t k = 0; k < context.size(); ++k) {
        if (k) name += '|';
        name += tag_name(context[k]);
      }
      out << name << "\t" << tag_name(context.back()) << "\t"
          << format_weight(model.transition[static_cast<Eigen::Index>(i)]) << "\n";
    }
  }
  if (!out) throw Error("failed writing model file " + path.string());
}

WeightedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty model file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kWeightedModelMagic) {
    throw ParseError(path.string() + ": not a weighted model file (bad magic '" + line + "')");
  }

  WeightedModel model;
  std::string value;
  expect_header(in, path, "model_type", model.model_type);
  if (model.model_type != "maxent" && model.model_type != "crf") {
    throw ParseError(path.string() + ": unknown model_type '" + model.model_type + "'");
  }
  expect_header(in, path, "markov_order", value);
  model.markov_order = std::stoi(value);
  if (model.model_type == "crf" && model.markov_order != 1 && model.markov_order != 2) {
    throw ParseError(path.string() + ": markov_order must be 1 or 2 for crf models");
  }
  expect_header(in, path, "tagset", value);
  if (value != tag_name(Tag::BFs) + "," + tag_name(Tag::IFs)) {
    throw ParseError(path.string() + ": unsupported tagset '" + value + "'");
  }
  expect_header(in, path, "templates", value);
  model.templates = templates_from_string(value);
  expect_header(in, path, "use_msg_boundary", value);
  model.use_msg_boundary = (value == "1");
  expect_header(in, path, "cutoff", value);
  model.cutoff = static_cast<std::size_t>(std::stoul(value));
  expect_header(in, path, "l2_sigma", value);
  model.l2_sigma = std::stod(value);

  std::vector<std::string> feature_names;
  std::vector<double> emission_weights;
  const std::size_t table =
      model.model_type == "crf" ? transition_table_size(model.markov_order) : 0;
  Eigen::VectorXd transition = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table));
  std::vector<bool> transition_seen(table, false);

  std::size_t line_no = 8;
  int run_rows = 0;  // emission rows seen for the current feature
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected '<feature>\\t<tag>\\t<weight>'");
    }
    char* end = nullptr;
    const double weight = std::strtod(fields[2].c_str(), &end);
    if (end != fields[2].c_str() + fields[2].size() || !std::isfinite(weight)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad weight '" +
                       fields[2] + "'");
    }
    if (fields[0].rfind(kTransitionPrefix, 0) == 0) {
      if (table == 0) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": transition row in a maxent model");
      }
      std::vector<std::string> parts = split(fields[0].substr(5), '|');
      if (parts.size() != static_cast<std::size_t>(model.markov_order) + 1) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": transition context must have " +
                         std::to_string(model.markov_order + 1) + " tags");
      }
      std::vector<Tag> context;
      for (const std::string& p : parts) context.push_back(parse_tag(p));
      if (parts.back() != fields[1]) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": transition tag column does not match the context");
      }
      const std::size_t idx = transition_index(context);
      transition[static_cast<Eigen::Index>(idx)] = weight;
      transition_seen[idx] = true;
    } else {
      const Tag tag = parse_tag(fields[1]);
      // Rows come in (B-fs, I-fs) pairs per feature, in vocabulary id order.
      if (feature_names.empty() || feature_names.back() != fields[0]) {
        if (!feature_names.empty() && run_rows != kNumTags) {
          throw ParseError(path.string() + ": feature '" + feature_names.back() +
                           "' does not have one row per tag");
        }
        feature_names.push_back(fields[0]);
        run_rows = 0;
      }
      if (static_cast<int>(tag) != run_rows) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": emission rows must list tags in B-fs, I-fs order");
      }
      ++run_rows;
      emission_weights.push_back(weight);
    }
  }
  if (!feature_names.empty() && run_rows != kNumTags) {
    throw ParseError(path.string() + ": feature '" + feature_names.back() +
                     "' does not have one row per tag");
  }

  const std::size_t K = feature_names.size();
  for (std::size_t i = 0; i + 1 < K; ++i) {
    if (!(feature_names[i] < feature_names[i + 1])) {
      throw ParseError(path.string() + ": emission rows out of lexicographic order near '" +
                       feature_names[i + 1] + "'");
    }
  }
  for (std::size_t i = 0; i < table; ++i) {
    if (!transition_seen[i]) {
      throw ParseError(path.string() + ": missing transition row " + std::to_string(i));
    }
  }

  model.vocab = FeatureVocabulary(feature_names, model.cutoff);
  model.emission = Eigen::Map<Eigen::VectorXd>(emission_weights.data(),
                                               static_cast<Eigen::Index>(emission_weights.size()));
  model.transition = std::move(transition);
  return model;
}

std::string peek_model_type(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty model file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line == kNeuralModelMagic) return "bilstm-crf";
  if (line != kWeightedModelMagic) {
    throw ParseError(path.string() + ": unrecognized model file (bad magic '" + line + "')");
  }
  std::string value;
  expect_header(in, path, "model_type", value);
  return value;
}

}  // namespace fsseg
