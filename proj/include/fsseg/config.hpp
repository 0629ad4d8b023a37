#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace fsseg {

// Flat "key = value" file; '#' starts a comment, blank lines are skipped.
// Duplicate keys are rejected. Consumers reject unknown keys.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

int config_int(const std::string& key, const std::string& value);
double config_double(const std::string& key, const std::string& value);
bool config_bool(const std::string& key, const std::string& value);  // true/false/1/0

}  // namespace fsseg
