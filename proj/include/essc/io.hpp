#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace essc::io {

// Throws IoError.
std::vector<std::uint8_t> read_file(const std::string& path);
std::string read_text(const std::string& path);
// Writes via a temporary file and rename.
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text(const std::string& path, std::string_view text);

}  // namespace essc::io
