#include "dimerlab/params.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dimerlab/errors.hpp"

namespace dimerlab {

double DimerParams::period() const { return 2.0 * std::numbers::pi / omega_drive; }

void DimerParams::validate() const {
  if (n < 1) throw StructuralError("DimerParams: n_particles must be >= 1");
  if (!(omega > 0.0) || !std::isfinite(omega))
    throw StructuralError("DimerParams: omega_hop must be positive");
  if (!(omega_drive > 0.0) || !std::isfinite(omega_drive))
    throw StructuralError("DimerParams: omega_drive must be positive");
  if (kappa < 0.0 || !std::isfinite(kappa))
    throw StructuralError("DimerParams: kappa must be >= 0");
  if (mu < 0.0 || !std::isfinite(mu))
    throw StructuralError("DimerParams: mu must be >= 0");
}

namespace {

void assign_key(DimerParams& p, const std::string& key, const std::string& value,
                const std::string& where) {
  std::istringstream vs(value);
  auto read_double = [&](double& dst) {
    if (!(vs >> dst) || !(vs >> std::ws).eof())
      throw StructuralError(where + ": bad numeric value '" + value + "' for " + key);
  };
  if (key == "n_particles") {
    double raw = 0.0;
    read_double(raw);
    if (raw != std::floor(raw))
      throw StructuralError(where + ": n_particles must be an integer");
    p.n = static_cast<int>(raw);
  } else if (key == "omega_hop") {
    read_double(p.omega);
  } else if (key == "kappa") {
    read_double(p.kappa);
  } else if (key == "mu") {
    read_double(p.mu);
  } else if (key == "omega_drive") {
    read_double(p.omega_drive);
  } else {
    throw StructuralError(where + ": unknown key '" + key + "'");
  }
}

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

} // namespace

DimerParams parse_params(const std::string& text, const DimerParams& base) {
  DimerParams p = base;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = strip(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw StructuralError("config line " + std::to_string(lineno) + ": expected key = value");
    assign_key(p, strip(line.substr(0, eq)), strip(line.substr(eq + 1)),
               "config line " + std::to_string(lineno));
  }
  p.validate();
  return p;
}

DimerParams load_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw StructuralError("cannot open config file: " + path);
  std::ostringstream body;
  body << f.rdbuf();
  return parse_params(body.str());
}

DimerParams apply_overrides(DimerParams p, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) assign_key(p, key, value, "override");
  p.validate();
  return p;
}

std::string params_to_config(const DimerParams& p) {
  std::ostringstream out;
  out.precision(17);
  out << "n_particles = " << p.n << "\n"
      << "omega_hop = " << p.omega << "\n"
      << "kappa = " << p.kappa << "\n"
      << "mu = " << p.mu << "\n"
      << "omega_drive = " << p.omega_drive << "\n";
  return out.str();
}

} // namespace dimerlab
