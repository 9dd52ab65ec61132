#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fee {

// Reads a whole file; throws ParseError when the file cannot be opened.
std::string read_file(const std::string& path);

// Writes via temp-file-plus-rename so readers never observe partial output.
void write_file_atomic(const std::string& path, std::string_view content);

// FNV-1a 64-bit; used for config hashes in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);

// Shortest round-trip decimal encoding of a double ('.' decimal point).
std::string format_double(double v);

} // namespace fee
