#include "osc/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "osc/errors.hpp"

namespace osc::io {

static_assert(std::endian::native == std::endian::little, "payloads are written in native byte order");

void write_framed(const std::filesystem::path& path, json header, const std::vector<char>& payload) {
  header["payload_bytes"] = payload.size();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

FramedFile read_framed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header line");
  FramedFile file;
  try {
    file.header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
  if (!file.header.contains("payload_bytes")) throw FormatError(path.string() + ": header lacks payload_bytes");
  const auto expected = file.header["payload_bytes"].get<std::size_t>();
  file.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (file.payload.size() != expected) {
    throw FormatError(path.string() + ": payload is " + std::to_string(file.payload.size()) + " bytes, header says " +
                      std::to_string(expected));
  }
  return file;
}

void append_doubles(std::vector<char>& out, const double* values, std::size_t count) {
  const auto* bytes = reinterpret_cast<const char*>(values);
  out.insert(out.end(), bytes, bytes + count * sizeof(double));
}

std::vector<double> take_doubles(const std::vector<char>& payload, std::size_t& offset, std::size_t count) {
  const std::size_t bytes = count * sizeof(double);
  if (offset + bytes > payload.size()) throw FormatError("payload truncated");
  std::vector<double> values(count);
  std::memcpy(values.data(), payload.data() + offset, bytes);
  offset += bytes;
  return values;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace osc::io
