#include "fsseg/features.hpp"

#include <algorithm>

#include "fsseg/errors.hpp"
#include "fsseg/text.hpp"

namespace fsseg {

void validate(const std::vector<FeatureTemplate>& templates) {
  if (templates.empty()) throw ConfigError("template set is empty");
  for (const FeatureTemplate& t : templates) {
    if (t.name.empty() || t.name.find('@') != std::string::npos ||
        t.name.find(';') != std::string::npos || has_whitespace(t.name)) {
      throw ConfigError("bad template name \"" + t.name + "\"");
    }
    if (t.offsets.empty() || t.offsets.size() > 3) {
      throw ConfigError("template " + t.name + ": 1 to 3 offsets required");
    }
    if (!std::is_sorted(t.offsets.begin(), t.offsets.end())) {
      throw ConfigError("template " + t.name + ": offsets must be ascending");
    }
    for (int off : t.offsets) {
      if (off < -2 || off > 2) throw ConfigError("template " + t.name + ": offset outside [-2, 2]");
    }
  }
}

std::vector<FeatureTemplate> default_templates() {
  return {
      {"u-2", {-2}}, {"u-1", {-1}}, {"u0", {0}}, {"u1", {1}}, {"u2", {2}},
      {"b-1:0", {-1, 0}}, {"b0:1", {0, 1}},
      {"t-1:1", {-1, 0, 1}},
  };
}

std::string templates_to_string(const std::vector<FeatureTemplate>& templates) {
  std::string out;
  for (const FeatureTemplate& t : templates) {
    if (!out.empty()) out += ';';
    out += t.name;
    out += '@';
    for (std::size_t i = 0; i < t.offsets.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(t.offsets[i]);
    }
  }
  return out;
}

std::vector<FeatureTemplate> templates_from_string(const std::string& s) {
  std::vector<FeatureTemplate> templates;
  for (const std::string& part : split(s, ';')) {
    std::size_t at = part.find('@');
    if (at == std::string::npos || at == 0) {
      throw ParseError("malformed template \"" + part + "\" (want name@off,off)");
    }
    FeatureTemplate t;
    t.name = part.substr(0, at);
    for (const std::string& off : split(part.substr(at + 1), ',')) {
      try {
        t.offsets.push_back(std::stoi(off));
      } catch (const std::exception&) {
        throw ParseError("malformed template offset \"" + off + "\" in \"" + part + "\"");
      }
    }
    templates.push_back(std::move(t));
  }
  validate(templates);
  return templates;
}

std::vector<std::string> extract_token_features(const TaggedSequence& seq, std::size_t pos,
                                                const std::vector<FeatureTemplate>& templates,
                                                bool use_msg_boundary) {
  const auto n = static_cast<std::ptrdiff_t>(seq.tokens.size());
  const auto p = static_cast<std::ptrdiff_t>(pos);
  std::vector<std::string> features;
  features.reserve(templates.size() + 1);
  for (const FeatureTemplate& t : templates) {
    std::string f = t.name;
    f += '=';
    for (std::size_t i = 0; i < t.offsets.size(); ++i) {
      if (i) f += '|';
      const std::ptrdiff_t at = p + t.offsets[i];
      if (at < 0) {
        f += kBosToken;
      } else if (at >= n) {
        f += kEosToken;
      } else {
        f += seq.tokens[static_cast<std::size_t>(at)].text;
      }
    }
    features.push_back(std::move(f));
  }
  if (use_msg_boundary && seq.tokens[pos].msg_start) {
    features.emplace_back(kMsgBoundaryFeature);
  }
  return features;
}

FeatureVocabulary::FeatureVocabulary(std::vector<std::string> strings, std::size_t cutoff)
    : by_id_(std::move(strings)), cutoff_(cutoff) {
  std::sort(by_id_.begin(), by_id_.end());
  by_id_.erase(std::unique(by_id_.begin(), by_id_.end()), by_id_.end());
  index_.reserve(by_id_.size());
  for (std::size_t i = 0; i < by_id_.size(); ++i) index_[by_id_[i]] = static_cast<int>(i);
}

int FeatureVocabulary::id_of(const std::string& s) const {
  auto it = index_.find(s);
  return it == index_.end() ? -1 : it->second;
}

FeatureVocabulary build_vocabulary(const Corpus& corpus,
                                   const std::vector<FeatureTemplate>& templates,
                                   std::size_t cutoff, bool use_msg_boundary) {
  if (corpus.sequences.empty()) throw DataError("build_vocabulary: empty corpus");
  validate(templates);
  std::unordered_map<std::string, std::size_t> counts;
  for (const TaggedSequence& seq : corpus.sequences) {
    if (!seq.labeled()) {
      throw DataError("build_vocabulary: unlabeled turn " + seq.dialogue_id + "/" + seq.turn_id);
    }
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      for (std::string& f : extract_token_features(seq, pos, templates, use_msg_boundary)) {
        ++counts[std::move(f)];
      }
    }
  }
  std::vector<std::string> kept;
  kept.reserve(counts.size());
  for (const auto& [feature, count] : counts) {
    if (count >= cutoff) kept.push_back(feature);
  }
  return FeatureVocabulary(std::move(kept), cutoff);
}

SparseVector vectorize(const TaggedSequence& seq, std::size_t pos,
                       const FeatureVocabulary& vocab,
                       const std::vector<FeatureTemplate>& templates, bool use_msg_boundary) {
  SparseVector x;
  for (const std::string& f : extract_token_features(seq, pos, templates, use_msg_boundary)) {
    int id = vocab.id_of(f);
    if (id >= 0) x.ids.push_back(id);
  }
  std::sort(x.ids.begin(), x.ids.end());
  x.ids.erase(std::unique(x.ids.begin(), x.ids.end()), x.ids.end());
  return x;
}

}  // namespace fsseg
