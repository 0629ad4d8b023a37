#include "fsseg/normalize.hpp"

#include <algorithm>
#include <fstream>

#include "fsseg/errors.hpp"
#include "fsseg/text.hpp"

namespace fsseg {

Dictionary::Dictionary(std::vector<DictEntry> entries, DictKind kind)
    : entries_(std::move(entries)), kind_(kind) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    DictEntry& e = entries_[i];
    if (e.variant.empty() || e.variant.size() > kMaxPhraseLen || e.standard.empty() ||
        e.standard.size() > kMaxPhraseLen) {
      throw DataError("dictionary phrases must have 1 to " + std::to_string(kMaxPhraseLen) +
                      " tokens");
    }
    for (std::string& tok : e.variant) tok = to_lower_utf8(tok);
    const std::string key = join(e.variant, " ");
    if (!by_variant_.emplace(key, static_cast<int>(i)).second) {
      throw DataError("duplicate dictionary variant \"" + key + "\"");
    }
  }
  // Closure check: a standard side that is itself a variant would rewrite
  // again on the next pass.
  for (const DictEntry& e : entries_) {
    const std::string standard_key = to_lower_utf8(join(e.standard, " "));
    auto it = by_variant_.find(standard_key);
    if (it != by_variant_.end()) {
      const DictEntry& next = entries_[static_cast<std::size_t>(it->second)];
      throw DataError("dictionary rewrite chain: \"" + join(e.variant, " ") + "\" -> \"" +
                      standard_key + "\" -> \"" + join(next.standard, " ") + "\"");
    }
  }
}

int Dictionary::find(const std::string& key) const {
  auto it = by_variant_.find(key);
  return it == by_variant_.end() ? -1 : it->second;
}

void NormalizationReport::merge(const NormalizationReport& other) {
  replacements += other.replacements;
  tokens_in += other.tokens_in;
  tokens_out += other.tokens_out;
  for (const auto& [key, count] : other.per_entry_hits) per_entry_hits[key] += count;
}

Dictionary load_dictionary(const std::filesystem::path& path, DictKind kind) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dictionary file " + path.string());

  std::vector<DictEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("kind=dialect") != std::string::npos) kind = DictKind::Dialect;
      if (line.find("kind=chat") != std::string::npos) kind = DictKind::Chat;
      continue;
    }
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 2) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 'variant<TAB>standard'");
    }
    DictEntry entry{split_whitespace(fields[0]), split_whitespace(fields[1])};
    if (entry.variant.empty() || entry.standard.empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty phrase");
    }
    if (entry.variant.size() > Dictionary::kMaxPhraseLen ||
        entry.standard.size() > Dictionary::kMaxPhraseLen) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": phrase longer than " +
                       std::to_string(Dictionary::kMaxPhraseLen) + " tokens");
    }
    entries.push_back(std::move(entry));
  }
  return Dictionary(std::move(entries), kind);
}

std::pair<TaggedSequence, NormalizationReport> normalize_sequence(
    const TaggedSequence& seq, const std::vector<Dictionary>& dicts, bool lowercase) {
  const std::size_t n = seq.tokens.size();
  NormalizationReport report;
  report.tokens_in = n;

  std::vector<std::string> lowered(n);
  for (std::size_t i = 0; i < n; ++i) lowered[i] = to_lower_utf8(seq.tokens[i].text);

  TaggedSequence out;
  out.dialogue_id = seq.dialogue_id;
  out.turn_id = seq.turn_id;
  out.speaker = seq.speaker;

  std::size_t i = 0;
  while (i < n) {
    const Dictionary* hit_dict = nullptr;
    int hit_entry = -1;
    std::size_t hit_len = 0;
    std::string hit_key;
    // Longest span wins; at equal length the earlier dictionary wins.
    const std::size_t max_len = std::min(Dictionary::kMaxPhraseLen, n - i);
    for (std::size_t len = max_len; len > 0 && !hit_dict; --len) {
      std::string key = lowered[i];
      for (std::size_t j = 1; j < len; ++j) {
        key += ' ';
        key += lowered[i + j];
      }
      for (const Dictionary& dict : dicts) {
        int entry = dict.find(key);
        if (entry >= 0) {
          hit_dict = &dict;
          hit_entry = entry;
          hit_len = len;
          hit_key = std::move(key);
          break;
        }
      }
    }

    if (!hit_dict) {
      Token tok = seq.tokens[i];
      if (lowercase) tok.text = lowered[i];
      out.tokens.push_back(std::move(tok));
      if (seq.labeled()) out.tags.push_back(seq.tags[i]);
      ++i;
      continue;
    }

    const DictEntry& entry = hit_dict->entries()[static_cast<std::size_t>(hit_entry)];
    if (seq.labeled() && entry.standard.size() != hit_len) {
      throw DataError("normalization would change the token count of a labeled sequence (\"" +
                      hit_key + "\" -> \"" + join(entry.standard, " ") + "\")");
    }
    for (std::size_t j = 0; j < entry.standard.size(); ++j) {
      Token tok;
      tok.text = lowercase ? to_lower_utf8(entry.standard[j]) : entry.standard[j];
      tok.msg_start = (j == 0) && seq.tokens[i].msg_start;
      out.tokens.push_back(std::move(tok));
      if (seq.labeled()) out.tags.push_back(seq.tags[i + j]);
    }
    ++report.replacements;
    ++report.per_entry_hits[hit_key];
    i += hit_len;
  }

  report.tokens_out = out.tokens.size();
  return {std::move(out), std::move(report)};
}

std::pair<Corpus, NormalizationReport> normalize_corpus(const Corpus& corpus,
                                                        const std::vector<Dictionary>& dicts,
                                                        bool lowercase) {
  Corpus out;
  out.source_kind = corpus.source_kind;
  out.sequences.reserve(corpus.sequences.size());
  NormalizationReport total;
  for (const TaggedSequence& seq : corpus.sequences) {
    try {
      auto [normalized, report] = normalize_sequence(seq, dicts, lowercase);
      out.sequences.push_back(std::move(normalized));
      total.merge(report);
    } catch (const DataError& e) {
      throw DataError("turn " + seq.dialogue_id + "/" + seq.turn_id + ": " + e.what());
    }
  }
  return {std::move(out), std::move(total)};
}

}  // namespace fsseg
