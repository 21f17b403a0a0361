#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hetattn {

/// Ordered "key = value" entries. Later duplicates override earlier ones when
/// applied in order.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Blank lines and lines starting with '#' are ignored; every other line must
/// contain '='. Keys and values are trimmed. Throws InputError with a line number.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);

// Value parsers; all throw InputError naming the key on bad input.
double parse_real(const std::string& key, const std::string& value);
std::size_t parse_count(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
bool parse_flag(const std::string& key, const std::string& value);
std::vector<double> parse_reals(const std::string& key, const std::string& value);
std::vector<std::string> parse_list(const std::string& value);

}  // namespace hetattn
