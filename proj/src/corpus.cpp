#include "fsseg/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fsseg/errors.hpp"
#include "fsseg/text.hpp"

namespace fsseg {

namespace {

const std::string kTagNames[kNumTags] = {"B-fs", "I-fs"};
const std::string kSourceNames[3] = {"message", "phone", "synthetic"};

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

const std::string& tag_name(Tag t) { return kTagNames[static_cast<int>(t)]; }

Tag parse_tag(const std::string& s) {
  if (s == kTagNames[0]) return Tag::BFs;
  if (s == kTagNames[1]) return Tag::IFs;
  throw ParseError("unknown tag \"" + s + "\" (expected B-fs or I-fs)");
}

const std::string& source_kind_name(SourceKind kind) {
  return kSourceNames[static_cast<int>(kind)];
}

SourceKind parse_source_kind(const std::string& s) {
  for (int i = 0; i < 3; ++i) {
    if (s == kSourceNames[i]) return static_cast<SourceKind>(i);
  }
  throw ParseError("unknown corpus source kind \"" + s + "\"");
}

void validate(const Corpus& corpus) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const TaggedSequence& seq : corpus.sequences) {
    const std::string where = "turn " + seq.dialogue_id + "/" + seq.turn_id;
    if (seq.tokens.empty()) throw DataError(where + ": sequence has no tokens");
    if (!seq.tags.empty() && seq.tags.size() != seq.tokens.size()) {
      throw DataError(where + ": tag count " + std::to_string(seq.tags.size()) +
                      " does not match token count " + std::to_string(seq.tokens.size()));
    }
    for (const Token& tok : seq.tokens) {
      if (tok.text.empty()) throw DataError(where + ": empty token");
      if (has_whitespace(tok.text)) {
        throw DataError(where + ": token \"" + tok.text + "\" contains whitespace");
      }
    }
    if (!seen.insert({seq.dialogue_id, seq.turn_id}).second) {
      throw DataError("duplicate dialogue/turn pair " + seq.dialogue_id + "/" + seq.turn_id);
    }
  }
}

Corpus load_corpus(const std::filesystem::path& path, bool expect_labels) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file " + path.string());

  Corpus corpus;
  TaggedSequence current;
  bool in_block = false;
  bool block_labeled = false;
  std::string line;
  std::size_t line_no = 0;

  auto flush = [&]() {
    if (!in_block) return;
    if (current.tokens.empty()) {
      parse_fail(path, line_no, "turn block for " + current.dialogue_id + "/" +
                                    current.turn_id + " has no tokens");
    }
    corpus.sequences.push_back(std::move(current));
    current = TaggedSequence{};
    in_block = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    if (line.empty()) {
      flush();
      continue;
    }

    if (line[0] == '#') {
      std::string body = line.substr(1);
      while (!body.empty() && body.front() == ' ') body.erase(body.begin());
      if (body.rfind("dialogue=", 0) == 0) {
        flush();
        std::size_t turn_at = body.find(" turn=");
        std::size_t speaker_at = body.find(" speaker=");
        if (turn_at == std::string::npos || speaker_at == std::string::npos ||
            speaker_at < turn_at) {
          parse_fail(path, line_no, "malformed turn header (want '# dialogue=<id> turn=<id> speaker=<s>')");
        }
        current.dialogue_id = body.substr(9, turn_at - 9);
        current.turn_id = body.substr(turn_at + 6, speaker_at - (turn_at + 6));
        current.speaker = body.substr(speaker_at + 9);
        in_block = true;
        block_labeled = false;
      } else if (body.rfind("source=", 0) == 0) {
        corpus.source_kind = parse_source_kind(body.substr(7));
      }
      // any other comment line is skipped
      continue;
    }

    if (!in_block) {
      parse_fail(path, line_no, "token line outside a turn block (missing '# dialogue=' header)");
    }

    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() > 3) {
      parse_fail(path, line_no, "expected 1 to 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }
    const std::string& text = fields[0];
    if (text.empty()) parse_fail(path, line_no, "empty token");
    if (has_whitespace(text)) parse_fail(path, line_no, "token contains whitespace");

    Token token{text, false};
    bool has_tag = false;
    Tag tag = Tag::BFs;

    if (fields.size() == 2) {
      if (fields[1] == "MB") {
        token.msg_start = true;
      } else {
        try {
          tag = parse_tag(fields[1]);
        } catch (const ParseError& e) {
          parse_fail(path, line_no, e.what());
        }
        has_tag = true;
      }
    } else if (fields.size() == 3) {
      try {
        tag = parse_tag(fields[1]);
      } catch (const ParseError& e) {
        parse_fail(path, line_no, e.what());
      }
      has_tag = true;
      if (fields[2] != "MB") {
        parse_fail(path, line_no, "third field must be MB, got \"" + fields[2] + "\"");
      }
      token.msg_start = true;
    }

    if (expect_labels && !has_tag) parse_fail(path, line_no, "missing tag column");
    if (!current.tokens.empty() && has_tag != block_labeled) {
      parse_fail(path, line_no, "mixed labeled and unlabeled lines within one turn");
    }
    block_labeled = has_tag;
    current.tokens.push_back(std::move(token));
    if (has_tag) current.tags.push_back(tag);
  }
  flush();

  if (corpus.sequences.empty()) {
    throw DataError("empty corpus: " + path.string() + " contains no turns");
  }
  validate(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  validate(corpus);
  std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw Error("cannot write corpus file " + path.string());

  out << "# source=" << source_kind_name(corpus.source_kind) << "\n";
  for (const TaggedSequence& seq : corpus.sequences) {
    out << "# dialogue=" << seq.dialogue_id << " turn=" << seq.turn_id
        << " speaker=" << seq.speaker << "\n";
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
      out << seq.tokens[i].text;
      if (seq.labeled()) out << "\t" << tag_name(seq.tags[i]);
      if (seq.tokens[i].msg_start) out << "\tMB";
      out << "\n";
    }
    out << "\n";
  }
  if (!out) throw Error("failed writing corpus file " + path.string());
}

std::vector<Segment> segments_from_tags(const std::vector<Tag>& tags) {
  if (tags.empty()) throw DataError("segments_from_tags: empty tag sequence");
  std::vector<Segment> segments;
  std::size_t start = 0;
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (tags[i] == Tag::BFs) {
      segments.push_back({start, i});
      start = i;
    }
  }
  segments.push_back({start, tags.size()});
  return segments;
}

std::vector<Tag> tags_from_segments(const std::vector<Segment>& segments, std::size_t length) {
  if (length == 0) throw DataError("tags_from_segments: zero length");
  std::size_t expected_start = 0;
  for (const Segment& seg : segments) {
    if (seg.start != expected_start || seg.end <= seg.start) {
      throw DataError("tags_from_segments: segments must be sorted, disjoint and covering");
    }
    expected_start = seg.end;
  }
  if (expected_start != length) {
    throw DataError("tags_from_segments: segments do not cover [0, " + std::to_string(length) + ")");
  }
  std::vector<Tag> tags(length, Tag::IFs);
  for (const Segment& seg : segments) tags[seg.start] = Tag::BFs;
  return tags;
}

}  // namespace fsseg
