#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace osc::io {

using nlohmann::json;

/// A header-framed binary file: one line of compact JSON terminated by '\n',
/// then a raw little-endian payload whose byte length the header records
/// under "payload_bytes".
struct FramedFile {
  json header;
  std::vector<char> payload;
};

void write_framed(const std::filesystem::path& path, json header, const std::vector<char>& payload);
/// Throws FormatError on a missing file, malformed header, or a payload whose
/// size differs from the header's "payload_bytes".
FramedFile read_framed(const std::filesystem::path& path);

void append_doubles(std::vector<char>& out, const double* values, std::size_t count);
/// Reads `count` doubles at `offset`, advancing it; FormatError if short.
std::vector<double> take_doubles(const std::vector<char>& payload, std::size_t& offset, std::size_t count);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace osc::io
