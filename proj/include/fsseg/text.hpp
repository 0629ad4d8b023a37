#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fsseg {

// Lowercases ASCII plus the precomposed Latin ranges that cover Vietnamese
// (Latin-1 supplement, Latin Extended-A, Latin Extended Additional, and the
// horned vowels in Extended-B). Other codepoints pass through unchanged.
std::string to_lower_utf8(std::string_view s);

// Splits on runs of ASCII whitespace; no empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

std::vector<std::string> split(std::string_view s, char delim);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool has_whitespace(std::string_view s);

}  // namespace fsseg
