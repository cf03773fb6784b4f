#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace linefix {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// FNV-1a, used for vocabulary and sample-identity hashes.
uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ull);

std::string to_hex(uint64_t v);
uint64_t from_hex(const std::string& s);

}  // namespace linefix
