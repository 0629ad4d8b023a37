#include <doctest.h>

#include <algorithm>
#include <set>
#include <unordered_map>

#include "fsseg/errors.hpp"
#include "fsseg/features.hpp"
#include "fsseg/rng.hpp"

using namespace fsseg;

namespace {

TaggedSequence seq_of(std::vector<std::string> words, std::vector<Tag> tags = {}) {
  TaggedSequence seq;
  seq.dialogue_id = "d";
  seq.turn_id = "t";
  seq.speaker = "S";
  for (auto& w : words) seq.tokens.push_back({std::move(w), false});
  seq.tags = std::move(tags);
  return seq;
}

Corpus one_turn_corpus(std::vector<std::string> words) {
  Corpus corpus;
  std::vector<Tag> tags(words.size(), Tag::IFs);
  tags[0] = Tag::BFs;
  corpus.sequences.push_back(seq_of(std::move(words), std::move(tags)));
  return corpus;
}

TaggedSequence random_seq(Rng& rng, std::size_t len) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g"};
  std::vector<std::string> picked;
  std::vector<Tag> tags;
  for (std::size_t i = 0; i < len; ++i) {
    picked.push_back(words[rng.below(words.size())]);
    tags.push_back(i == 0 || rng.bernoulli(0.3) ? Tag::BFs : Tag::IFs);
  }
  return seq_of(std::move(picked), std::move(tags));
}

}  // namespace

TEST_CASE("default templates at position 0 of [xin, chào]") {
  const auto features = extract_token_features(seq_of({"xin", "chào"}), 0, default_templates(),
                                               false);
  const std::set<std::string> got(features.begin(), features.end());
  const std::set<std::string> want = {"u-2=<BOS>",      "u-1=<BOS>", "u0=xin",
                                      "u1=chào",        "u2=<EOS>",  "b-1:0=<BOS>|xin",
                                      "b0:1=xin|chào",  "t-1:1=<BOS>|xin|chào"};
  CHECK(got == want);
  CHECK(features.size() == 8);
}

TEST_CASE("single-token sequence resolves every non-zero offset to a sentinel") {
  const auto features = extract_token_features(seq_of({"dạ"}), 0, default_templates(), false);
  for (const std::string& f : features) {
    if (f.rfind("u0=", 0) == 0) {
      CHECK(f == "u0=dạ");
    } else if (f[0] == 'u') {
      const bool sentinel = f.find("<BOS>") != std::string::npos ||
                            f.find("<EOS>") != std::string::npos;
      CHECK(sentinel);
    }
  }
}

TEST_CASE("msg_start token emits MB=1 when the flag is on") {
  // two-message turn: second message starts at position 1
  auto seq = seq_of({"uhhhhhh", "hic", "hic"});
  seq.tokens[1].msg_start = true;
  auto with = extract_token_features(seq, 1, default_templates(), true);
  CHECK(std::count(with.begin(), with.end(), std::string(kMsgBoundaryFeature)) == 1);
  auto without_flag = extract_token_features(seq, 1, default_templates(), false);
  CHECK(std::count(without_flag.begin(), without_flag.end(), std::string(kMsgBoundaryFeature)) ==
        0);
  auto other_pos = extract_token_features(seq, 2, default_templates(), true);
  CHECK(std::count(other_pos.begin(), other_pos.end(), std::string(kMsgBoundaryFeature)) == 0);
}

TEST_CASE("template serialization round trips") {
  const auto templates = default_templates();
  const std::string s = templates_to_string(templates);
  CHECK(s == "u-2@-2;u-1@-1;u0@0;u1@1;u2@2;b-1:0@-1,0;b0:1@0,1;t-1:1@-1,0,1");
  CHECK(templates_from_string(s) == templates);
  CHECK_THROWS_AS(templates_from_string("noatsign"), ParseError);
  CHECK_THROWS_AS(templates_from_string("u0@x"), ParseError);
}

TEST_CASE("template validation") {
  using Templates = std::vector<FeatureTemplate>;
  CHECK_THROWS_AS(validate(Templates{}), ConfigError);
  CHECK_THROWS_AS(validate(Templates{{"w", {-3}}}), ConfigError);           // outside window
  CHECK_THROWS_AS(validate(Templates{{"w", {1, 0}}}), ConfigError);         // unsorted
  CHECK_THROWS_AS(validate(Templates{{"w", {-1, 0, 1, 2}}}), ConfigError);  // too many
  CHECK_THROWS_AS(validate(Templates{{"has space", {0}}}), ConfigError);
  CHECK_NOTHROW(validate(default_templates()));
}

TEST_CASE("build_vocabulary honors the cutoff, ids are lexicographic") {
  Corpus corpus = one_turn_corpus({"xin", "chào", "xin"});

  const FeatureVocabulary all = build_vocabulary(corpus, default_templates(), 1, false);
  // brute-force count of distinct strings with an independent map
  std::unordered_map<std::string, std::size_t> counts;
  for (const TaggedSequence& seq : corpus.sequences) {
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      for (const std::string& f : extract_token_features(seq, pos, default_templates(), false)) {
        ++counts[f];
      }
    }
  }
  CHECK(all.size() == counts.size());
  for (const auto& [f, c] : counts) CHECK(all.id_of(f) >= 0);

  std::size_t repeated = 0;
  for (const auto& [f, c] : counts) {
    if (c >= 2) ++repeated;
  }
  const FeatureVocabulary cut = build_vocabulary(corpus, default_templates(), 2, false);
  CHECK(cut.size() == repeated);
  CHECK(cut.id_of("u0=xin") >= 0);      // occurs twice
  CHECK(cut.id_of("b0:1=xin|chào") < 0);  // singleton

  // dense ids in lexicographic order of the strings
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    CHECK(all.string_of(static_cast<int>(i)) < all.string_of(static_cast<int>(i + 1)));
    CHECK(all.id_of(all.string_of(static_cast<int>(i))) == static_cast<int>(i));
  }
}

TEST_CASE("build_vocabulary rejects empty or unlabeled corpora") {
  CHECK_THROWS_AS(build_vocabulary(Corpus{}, default_templates(), 1, false), DataError);
  Corpus unlabeled;
  unlabeled.sequences.push_back(seq_of({"a"}));
  CHECK_THROWS_AS(build_vocabulary(unlabeled, default_templates(), 1, false), DataError);
}

TEST_CASE("vectorize maps known features and drops unknown ones") {
  Corpus corpus = one_turn_corpus({"xin", "chào"});
  const FeatureVocabulary vocab = build_vocabulary(corpus, default_templates(), 1, false);

  const SparseVector x = vectorize(corpus.sequences[0], 0, vocab, default_templates(), false);
  CHECK(x.ids.size() == default_templates().size());
  CHECK(std::is_sorted(x.ids.begin(), x.ids.end()));
  for (std::size_t i = 0; i + 1 < x.ids.size(); ++i) CHECK(x.ids[i] < x.ids[i + 1]);
  for (int id : x.ids) CHECK(id < static_cast<int>(vocab.size()));

  // an interior position of an all-unknown sequence hits no sentinel
  // features either, so nothing survives
  const SparseVector oov =
      vectorize(seq_of({"z1", "z2", "z3", "z4", "z5"}), 2, vocab, default_templates(), false);
  CHECK(oov.ids.empty());
}

TEST_CASE("vectorize loses nothing on training data when cutoff is 1") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Corpus corpus;
    corpus.sequences.push_back(random_seq(rng, 1 + rng.below(10)));
    const FeatureVocabulary vocab = build_vocabulary(corpus, default_templates(), 1, true);
    const TaggedSequence& seq = corpus.sequences[0];
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      const auto strings = extract_token_features(seq, pos, default_templates(), true);
      const std::set<std::string> unique(strings.begin(), strings.end());
      const SparseVector x = vectorize(seq, pos, vocab, default_templates(), true);
      CHECK(x.ids.size() == unique.size());
    }
  }
}

TEST_CASE("window locality: a token edit only moves features within +-2") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    TaggedSequence seq = random_seq(rng, 6 + rng.below(6));
    TaggedSequence edited = seq;
    const std::size_t p = rng.below(seq.size());
    edited.tokens[p].text = "CHANGED";
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      const auto before = extract_token_features(seq, pos, default_templates(), false);
      const auto after = extract_token_features(edited, pos, default_templates(), false);
      const auto distance =
          pos > p ? pos - p : p - pos;
      if (distance > 2) {
        CHECK(before == after);
      } else if (pos == p) {
        CHECK(before != after);
      }
    }
  }
}

TEST_CASE("extraction is deterministic") {
  const auto seq = seq_of({"xin", "chào", "cậu"});
  const auto a = extract_token_features(seq, 1, default_templates(), false);
  const auto b = extract_token_features(seq, 1, default_templates(), false);
  CHECK(a == b);
}
