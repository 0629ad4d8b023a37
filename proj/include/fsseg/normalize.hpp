#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fsseg/corpus.hpp"

namespace fsseg {

enum class DictKind { Chat, Dialect };

struct DictEntry {
  std::vector<std::string> variant;   // 1..4 tokens, stored lowercase
  std::vector<std::string> standard;  // 1..4 tokens
};

// Ordered variant -> standard phrase mapping. Construction verifies that
// variants are unique and that no standard side is itself a variant key
// (rewrite chains would break idempotence).
class Dictionary {
 public:
  static constexpr std::size_t kMaxPhraseLen = 4;

  Dictionary(std::vector<DictEntry> entries, DictKind kind);

  const std::vector<DictEntry>& entries() const { return entries_; }
  DictKind kind() const { return kind_; }

  // Entry index for the exact lowercase key (tokens joined with one space),
  // or -1 when absent.
  int find(const std::string& key) const;

 private:
  std::vector<DictEntry> entries_;
  DictKind kind_;
  std::unordered_map<std::string, int> by_variant_;
};

struct NormalizationReport {
  std::size_t replacements = 0;
  std::map<std::string, std::size_t> per_entry_hits;  // variant key -> hits
  std::size_t tokens_in = 0;
  std::size_t tokens_out = 0;

  void merge(const NormalizationReport& other);
};

// TSV file, one "variant<TAB>standard" per line; '#' comments allowed.
// A '# kind=dialect' comment overrides the kind argument of the CLI path.
Dictionary load_dictionary(const std::filesystem::path& path, DictKind kind);

// Greedy longest-match left-to-right over token n-grams (case-insensitive,
// up to 4 tokens); at equal length the earlier dictionary in the list wins.
// Labeled sequences are rejected when a replacement would change the token
// count. With lowercase, all output tokens are case-folded.
std::pair<TaggedSequence, NormalizationReport> normalize_sequence(
    const TaggedSequence& seq, const std::vector<Dictionary>& dicts, bool lowercase);

std::pair<Corpus, NormalizationReport> normalize_corpus(const Corpus& corpus,
                                                        const std::vector<Dictionary>& dicts,
                                                        bool lowercase);

}  // namespace fsseg
