#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace peak {

// Reads a whole file; throws IoError on failure.
std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temp file followed by rename, so readers never observe
// a partially written artifact.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

// FNV-1a 64-bit digest rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace peak
