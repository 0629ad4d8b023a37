#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsseg {

// Per-token tags of the B/I scheme. Order matters: B-fs comes first in the
// tagset and wins deterministic tie-breaks.
enum class Tag : std::uint8_t { BFs = 0, IFs = 1 };

inline constexpr int kNumTags = 2;

const std::string& tag_name(Tag t);  // "B-fs" / "I-fs"
Tag parse_tag(const std::string& s);

struct Token {
  std::string text;        // one syllable or emoticon cluster, no whitespace
  bool msg_start = false;  // true when this token opens a new message

  friend bool operator==(const Token&, const Token&) = default;
};

// One conversational turn: the unit of training and decoding.
struct TaggedSequence {
  std::string dialogue_id;
  std::string turn_id;
  std::string speaker;
  std::vector<Token> tokens;
  std::vector<Tag> tags;  // empty when unlabeled, else one per token

  bool labeled() const { return !tags.empty(); }
  std::size_t size() const { return tokens.size(); }

  friend bool operator==(const TaggedSequence&, const TaggedSequence&) = default;
};

// Half-open token span [start, end) covering one functional segment.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class SourceKind { Message, Phone, Synthetic };

const std::string& source_kind_name(SourceKind kind);
SourceKind parse_source_kind(const std::string& s);

struct Corpus {
  std::vector<TaggedSequence> sequences;
  SourceKind source_kind = SourceKind::Synthetic;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Throws DataError on any invariant breach (empty token list, tag length
// mismatch, whitespace in tokens, duplicate dialogue/turn ids).
void validate(const Corpus& corpus);

// Reads the column-format corpus file. With expect_labels every token line
// must carry a tag. Throws ParseError with the offending line number, or
// DataError for an empty corpus / duplicate ids.
Corpus load_corpus(const std::filesystem::path& path, bool expect_labels);

// Inverse of load_corpus; output is byte-stable for a fixed corpus.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// A segment opens at every B-fs and at position 0 regardless of its tag.
// Output spans are sorted, disjoint and cover [0, n).
std::vector<Segment> segments_from_tags(const std::vector<Tag>& tags);

// Exact inverse of segments_from_tags on its own output. The segments must
// be sorted, disjoint and cover [0, length); otherwise throws DataError.
std::vector<Tag> tags_from_segments(const std::vector<Segment>& segments, std::size_t length);

}  // namespace fsseg
