#include <doctest.h>
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dimerlab/io.hpp"
#include "dimerlab/params.hpp"

using namespace dimerlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           fs::path("dimerlab_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("format_double is shortest round-trip") {
  for (double v : {0.1, 0.5, 1.0, -3.25, 1e-300, 6.02e23, 2.0 * M_PI / 1.9,
                   -0.4278915, 1.0 / 3.0}) {
    const std::string s = CsvWriter::format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(CsvWriter::format_double(0.1) == "0.1");
  CHECK(CsvWriter::format_double(-2.0) == "-2");
}

TEST_CASE("csv writer enforces the header width and is byte-deterministic") {
  CsvWriter a({"x", "y"});
  a.append_row({1.0, 2.5});
  a.append_row({-0.25, 1e-17});
  CsvWriter b({"x", "y"});
  b.append_row({1.0, 2.5});
  b.append_row({-0.25, 1e-17});
  CHECK(a.body() == b.body());
  CHECK(a.body().substr(0, 4) == "x,y\n");
  CHECK_THROWS_AS(a.append_row({1.0}), StructuralError);
  CHECK_THROWS_AS(a.append_cells({"1", "2", "3"}), StructuralError);
  CHECK_THROWS_AS(CsvWriter(std::vector<std::string>{}), StructuralError);
}

TEST_CASE("fnv1a matches the canonical 64-bit test vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("abc") == 0xe71fa2190541574bull);
  CHECK(fnv1a_hex("abc") == "e71fa2190541574b");
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("text and json round-trips") {
  TempDir tmp;
  const std::string payload = "line1\nline2 with trailing space \n";
  write_text(tmp.path / "t.txt", payload);
  CHECK(read_text(tmp.path / "t.txt") == payload);
  CHECK_THROWS_AS(read_text(tmp.path / "absent.txt"), StructuralError);

  Json j = {{"name", "run"}, {"values", {1, 2, 3}}, {"nested", {{"x", 0.5}}}};
  write_json(tmp.path / "j.json", j);
  CHECK(read_json(tmp.path / "j.json") == j);
}

TEST_CASE("double blobs round-trip and reject corruption") {
  TempDir tmp;
  std::vector<double> data = {1.0, -2.5, 3.14159, 1e300, 0.0};
  write_doubles(tmp.path / "d.blob", data);
  std::vector<double> back;
  REQUIRE(read_doubles(tmp.path / "d.blob", back));
  CHECK(back == data);

  CHECK_FALSE(read_doubles(tmp.path / "missing.blob", back));
  write_text(tmp.path / "bad.blob", "not a blob at all");
  CHECK_FALSE(read_doubles(tmp.path / "bad.blob", back));
}

TEST_CASE("config parsing round-trips and rejects malformed input") {
  DimerParams p;
  p.n = 321;
  p.kappa = 0.0031;
  p.mu = 0.17;
  p.omega_drive = 2.3;
  p.omega = 0.9;
  DimerParams q = parse_params(params_to_config(p));
  CHECK(q.n == p.n);
  CHECK(q.kappa == p.kappa);
  CHECK(q.mu == p.mu);
  CHECK(q.omega_drive == p.omega_drive);
  CHECK(q.omega == p.omega);

  // Comments, blank lines, and defaults for missing keys.
  DimerParams base;
  DimerParams r = parse_params("# comment\n\nmu = 0.25\n", base);
  CHECK(r.mu == 0.25);
  CHECK(r.n == base.n);

  CHECK_THROWS_AS(parse_params("unknown_key = 3\n"), StructuralError);
  CHECK_THROWS_AS(parse_params("mu = abc\n"), StructuralError);
  CHECK_THROWS_AS(parse_params("mu 0.3\n"), StructuralError);
  CHECK_THROWS_AS(parse_params("n_particles = 2.5\n"), StructuralError);
}

TEST_CASE("overrides apply on top of a base set") {
  DimerParams p;
  const std::map<std::string, std::string> good{{"mu", "0.05"}, {"n_particles", "123"}};
  DimerParams q = apply_overrides(p, good);
  CHECK(q.mu == 0.05);
  CHECK(q.n == 123);
  CHECK(q.omega_drive == p.omega_drive);
  const std::map<std::string, std::string> bad_key{{"not_a_key", "1"}};
  const std::map<std::string, std::string> bad_value{{"mu", ""}};
  CHECK_THROWS_AS(apply_overrides(p, bad_key), StructuralError);
  CHECK_THROWS_AS(apply_overrides(p, bad_value), StructuralError);
}
