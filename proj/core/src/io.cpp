#include "dimerlab/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "dimerlab/errors.hpp"

namespace dimerlab {

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  if (header.empty()) throw StructuralError("CsvWriter: empty header");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) body_ += ',';
    body_ += header[i];
  }
  body_ += '\n';
}

std::string CsvWriter::format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw NumericalError("CsvWriter: double formatting failed");
  return std::string(buf, end);
}

void CsvWriter::append_row(const std::vector<double>& values) {
  if (values.size() != columns_)
    throw StructuralError("CsvWriter: row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) body_ += ',';
    body_ += format_double(values[i]);
  }
  body_ += '\n';
}

void CsvWriter::append_cells(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw StructuralError("CsvWriter: row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) body_ += ',';
    body_ += cells[i];
  }
  body_ += '\n';
}

void CsvWriter::write(const std::filesystem::path& path) const {
  write_text(path, body_);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StructuralError("cannot open for writing: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw NumericalError("short write: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw StructuralError("cannot open for reading: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return text;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

Json read_json(const std::filesystem::path& path) {
  return Json::parse(read_text(path));
}

namespace {
constexpr std::uint64_t blob_magic = 0x444c42424c4f4231ull; // "DLBBLOB1"
}

void write_doubles(const std::filesystem::path& path, const std::vector<double>& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StructuralError("cannot open for writing: " + path.string());
  const std::uint64_t count = data.size();
  f.write(reinterpret_cast<const char*>(&blob_magic), sizeof blob_magic);
  f.write(reinterpret_cast<const char*>(&count), sizeof count);
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw NumericalError("short write: " + path.string());
}

bool read_doubles(const std::filesystem::path& path, std::vector<double>& data) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  std::uint64_t magic = 0, count = 0;
  f.read(reinterpret_cast<char*>(&magic), sizeof magic);
  f.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!f || magic != blob_magic) return false;
  data.resize(count);
  f.read(reinterpret_cast<char*>(data.data()),
         static_cast<std::streamsize>(count * sizeof(double)));
  return static_cast<bool>(f);
}

} // namespace dimerlab
