#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dimerlab/errors.hpp"

namespace dimerlab {

using Json = nlohmann::json;

// Deterministic CSV writer: fixed shortest-roundtrip formatting for doubles,
// '\n' line endings, no localization.  Identical inputs produce identical
// bytes, which the experiment bundles rely on.
class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> header);

  void append_row(const std::vector<double>& values);
  void append_cells(const std::vector<std::string>& cells);

  const std::string& body() const { return body_; }
  void write(const std::filesystem::path& path) const;

  static std::string format_double(double v);

private:
  std::size_t columns_;
  std::string body_;
};

// FNV-1a, used to fingerprint configs in provenance sidecars.
std::uint64_t fnv1a(const std::string& text);
std::string fnv1a_hex(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

// Flat binary blobs for caching expensive numerical artifacts.  Layout:
// magic, count, then raw doubles.  Not an interchange format.
void write_doubles(const std::filesystem::path& path, const std::vector<double>& data);
bool read_doubles(const std::filesystem::path& path, std::vector<double>& data);

} // namespace dimerlab
