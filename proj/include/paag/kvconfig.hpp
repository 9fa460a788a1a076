#pragma once

#include <map>
#include <string>

namespace paag {

/// Flat `key = value` text; `#` starts a comment, blank lines are ignored.
/// Throws ConfigError on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_kv(const std::string& text);
/// Canonical form: keys sorted, one `key = value` per line.
std::string format_kv(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_kv_file(const std::string& path);

}  // namespace paag
