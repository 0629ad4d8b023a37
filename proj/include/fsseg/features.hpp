#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsseg/corpus.hpp"

namespace fsseg {

inline constexpr const char* kBosToken = "<BOS>";
inline constexpr const char* kEosToken = "<EOS>";
inline constexpr const char* kMsgBoundaryFeature = "MB=1";

// One n-gram template: joins the tokens at the given offsets around the
// current position. Offsets are sorted, 1 to 3 of them, each within [-2, 2].
struct FeatureTemplate {
  std::string name;
  std::vector<int> offsets;

  friend bool operator==(const FeatureTemplate&, const FeatureTemplate&) = default;
};

void validate(const std::vector<FeatureTemplate>& templates);

// Unigrams at -2..+2, bigrams (-1,0) and (0,+1), trigram (-1,0,+1).
std::vector<FeatureTemplate> default_templates();

// Header serialization: "u0@0;b-1:0@-1,0;..." (name '@' offsets).
std::string templates_to_string(const std::vector<FeatureTemplate>& templates);
std::vector<FeatureTemplate> templates_from_string(const std::string& s);

// One "<name>=<tok>|<tok>..." string per template; out-of-range offsets read
// as <BOS>/<EOS>. Adds "MB=1" when requested and the token opens a message.
std::vector<std::string> extract_token_features(const TaggedSequence& seq, std::size_t pos,
                                                const std::vector<FeatureTemplate>& templates,
                                                bool use_msg_boundary);

// Dense feature-string <-> id bijection. Ids follow the lexicographic order
// of the stored strings, so a rebuilt vocabulary reproduces the same ids.
class FeatureVocabulary {
 public:
  FeatureVocabulary() = default;

  // Sorts, dedups and indexes; strings must already satisfy the cutoff.
  FeatureVocabulary(std::vector<std::string> strings, std::size_t cutoff);

  int id_of(const std::string& s) const;  // -1 when unknown
  const std::string& string_of(int id) const { return by_id_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return by_id_.size(); }
  std::size_t cutoff() const { return cutoff_; }

  friend bool operator==(const FeatureVocabulary& a, const FeatureVocabulary& b) {
    return a.by_id_ == b.by_id_ && a.cutoff_ == b.cutoff_;
  }

 private:
  std::vector<std::string> by_id_;
  std::unordered_map<std::string, int> index_;
  std::size_t cutoff_ = 1;
};

// Keeps exactly the feature strings occurring at least cutoff times in the
// labeled corpus.
FeatureVocabulary build_vocabulary(const Corpus& corpus,
                                   const std::vector<FeatureTemplate>& templates,
                                   std::size_t cutoff, bool use_msg_boundary);

// Binary-valued sparse observation: sorted ids of the active features.
struct SparseVector {
  std::vector<int> ids;
};

// Unknown feature strings are dropped (test-time OOV decodes by the known
// features only).
SparseVector vectorize(const TaggedSequence& seq, std::size_t pos,
                       const FeatureVocabulary& vocab,
                       const std::vector<FeatureTemplate>& templates, bool use_msg_boundary);

}  // namespace fsseg
