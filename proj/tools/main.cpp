// dimerlab: command-line front end for the driven two-site boson toolkit.
//
//   dimerlab <subcommand> --config <path> [--set key=value ...] --out <dir>
//
// Subcommands: evolve, floquet, sweep, husimi, poincare, orbit, tube,
// requantize, experiment, validate.  Exit codes: 0 success, 2 physics-level
// rejection (the requested object does not exist at these parameters),
// 1 any other failure.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dimerlab/coherent.hpp"
#include "dimerlab/experiment.hpp"
#include "dimerlab/io.hpp"
#include "dimerlab/meanfield.hpp"
#include "dimerlab/model.hpp"
#include "dimerlab/params.hpp"
#include "dimerlab/propagate.hpp"
#include "dimerlab/semiclassics.hpp"
#include "dimerlab/version.hpp"

namespace fs = std::filesystem;
using namespace dimerlab;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& c, bool out_required = true) {
  cmd->add_option("--config", c.config_path, "parameter file (key = value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override as key=value; repeatable");
  auto* out = cmd->add_option("--out", c.out_dir, "output directory, created if missing");
  if (out_required) out->required();
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> m;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw StructuralError("--set expects key=value, got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw StructuralError("--set with empty key: '" + s + "'");
    m[key] = trim(s.substr(eq + 1));
  }
  return m;
}

DimerParams resolve_params(const CommonArgs& c) {
  DimerParams p;
  if (!c.config_path.empty()) p = load_params(c.config_path);
  const auto overrides = parse_sets(c.sets);
  if (!overrides.empty()) p = apply_overrides(p, overrides);
  p.validate();
  return p;
}

fs::path prepare_out(const CommonArgs& c) {
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  return dir;
}

Json params_json(const DimerParams& p) {
  return Json{{"n_particles", p.n},
              {"omega_hop", p.omega},
              {"kappa", p.kappa},
              {"mu", p.mu},
              {"omega_drive", p.omega_drive}};
}

// Sidecar common to every output bundle: full parameter provenance, derived
// scales, tolerances, and a hash of the canonical config text.
Json meta_for(const std::string& kind, const DimerParams& p, double tolerance) {
  return Json{{"kind", kind},
              {"version", version_string},
              {"params", params_json(p)},
              {"derived",
               Json{{"alpha", p.alpha()},
                    {"hbar_eff", p.hbar_eff()},
                    {"period", p.period()},
                    {"dtau", p.dtau()}}},
              {"tolerance", tolerance},
              {"config_hash", fnv1a_hex(params_to_config(p))}};
}

std::string parity_name(Parity par) { return par == Parity::even ? "even" : "odd"; }

int parse_int(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw StructuralError("");
    return v;
  } catch (...) {
    throw StructuralError(std::string(what) + ": not an integer: '" + s + "'");
  }
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const std::string tok = trim(csv.substr(start, comma - start));
    if (tok.empty()) throw StructuralError(std::string(what) + ": empty entry in '" + csv + "'");
    out.push_back(parse_int(tok, what));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw StructuralError(std::string(what) + ": empty list");
  return out;
}

PhasePoint parse_point(const std::string& s, const char* what) {
  const auto comma = s.find(',');
  if (comma == std::string::npos)
    throw StructuralError(std::string(what) + ": expected 'p,phi', got '" + s + "'");
  try {
    return PhasePoint{std::stod(trim(s.substr(0, comma))), std::stod(trim(s.substr(comma + 1)))};
  } catch (const StructuralError&) {
    throw;
  } catch (...) {
    throw StructuralError(std::string(what) + ": expected 'p,phi', got '" + s + "'");
  }
}

// ---------------------------------------------------------------------------
// evolve: strobe a coherent state and record the return probability.

struct EvolveArgs {
  CommonArgs common;
  double p0 = -0.497, phi0 = 0.0;
  int periods = 16, samples = 24;
  double tol = 1e-10;
  bool occupation = false;
};

int run_evolve(const EvolveArgs& a) {
  const DimerParams p = resolve_params(a.common);
  const fs::path out = prepare_out(a.common);
  EvolveOptions opt;
  opt.tol = a.tol;

  const ManyBodyState psi0 = coherent_state(p, {a.p0, a.phi0});
  const TimeSeries ts = return_probability_series(p, psi0, a.periods, a.samples, opt);

  CsvWriter csv({"time", "return_probability"});
  for (Eigen::Index i = 0; i < ts.times.size(); ++i) csv.append_row({ts.times[i], ts.values[i]});
  write_text(out / "series.csv", csv.body());

  Json meta = meta_for("evolve", p, a.tol);
  meta["seed"] = Json{{"p", a.p0}, {"phi", a.phi0}};
  meta["plan"] = Json{{"horizon_periods", a.periods}, {"samples_per_period", a.samples}};
  std::vector<std::string> files{"series.csv"};

  if (a.occupation) {
    const OccupationSeries os = fock_occupation_series(p, psi0, a.periods, a.samples, opt);
    std::vector<std::string> header{"time"};
    for (int j = 0; j <= p.n; ++j) header.push_back("f" + std::to_string(j));
    CsvWriter occ(header);
    for (Eigen::Index i = 0; i < os.times.size(); ++i) {
      std::vector<double> row{os.times[i]};
      for (Eigen::Index j = 0; j < os.occupation.rows(); ++j) row.push_back(os.occupation(j, i));
      occ.append_row(row);
    }
    write_text(out / "occupation.csv", occ.body());
    files.push_back("occupation.csv");
  }
  meta["files"] = files;
  write_json(out / "meta.json", meta);
  std::printf("evolve: %d periods at N = %d -> %s\n", a.periods, p.n, out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// floquet: one-period decomposition; quasienergies, parities, diagnostics.

struct FloquetArgs {
  CommonArgs common;
  std::string cache_dir;
  double tol = 1e-10;
};

int run_floquet(const FloquetArgs& a) {
  const DimerParams p = resolve_params(a.common);
  const fs::path out = prepare_out(a.common);
  EvolveOptions opt;
  opt.tol = a.tol;

  const FloquetSolution fsol = floquet_solve_cached(p, opt, a.cache_dir);

  CsvWriter csv({"index", "quasienergy", "parity"});
  for (Eigen::Index i = 0; i < fsol.quasienergies.size(); ++i)
    csv.append_cells({std::to_string(i), CsvWriter::format_double(fsol.quasienergies[i]),
                      parity_name(fsol.parity[static_cast<std::size_t>(i)])});
  write_text(out / "quasienergies.csv", csv.body());

  Json meta = meta_for("floquet", p, a.tol);
  meta["zone_width"] = fsol.omega;
  meta["max_residual"] = fsol.max_residual;
  meta["unitarity_defect"] = fsol.unitarity_defect;
  meta["files"] = Json::array({"quasienergies.csv"});
  write_json(out / "meta.json", meta);
  std::printf("floquet: %d quasienergies, max residual %.3e -> %s\n",
              static_cast<int>(fsol.quasienergies.size()), fsol.max_residual,
              out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// sweep: quasienergy spectrum along a drive-parameter grid.

struct SweepArgs {
  CommonArgs common;
  std::string axis = "mu";
  double from = 0.0, to = 0.8;
  int points = 17;
  double tol = 1e-10;
};

int run_sweep(const SweepArgs& a) {
  const DimerParams p = resolve_params(a.common);
  const fs::path out = prepare_out(a.common);
  if (a.points < 2) throw StructuralError("sweep: need at least two grid points");
  SweepAxis axis;
  if (a.axis == "mu")
    axis = SweepAxis::mu;
  else if (a.axis == "omega_drive")
    axis = SweepAxis::omega_drive;
  else
    throw StructuralError("sweep: axis must be 'mu' or 'omega_drive', got '" + a.axis + "'");

  std::vector<double> grid(static_cast<std::size_t>(a.points));
  for (int i = 0; i < a.points; ++i)
    grid[static_cast<std::size_t>(i)] = a.from + (a.to - a.from) * i / (a.points - 1);

  EvolveOptions opt;
  opt.tol = a.tol;
  const SweepResult sr = quasienergy_sweep(p, axis, grid, opt);

  std::vector<std::string> header{a.axis};
  for (int l = 0; l <= p.n; ++l) header.push_back("eps_" + std::to_string(l));
  CsvWriter csv(header);
  for (Eigen::Index i = 0; i < sr.grid.size(); ++i) {
    std::vector<double> row{sr.grid[i]};
    for (Eigen::Index l = 0; l < sr.quasienergies.cols(); ++l)
      row.push_back(sr.quasienergies(i, l));
    csv.append_row(row);
  }
  write_text(out / "sweep.csv", csv.body());

  int failed = 0;
  for (auto f : sr.failed) failed += f ? 1 : 0;
  Json meta = meta_for("sweep", p, a.tol);
  meta["axis"] = a.axis;
  meta["grid"] = Json{{"from", a.from}, {"to", a.to}, {"points", a.points}};
  meta["min_even_gap"] = sr.min_even_gap;
  meta["min_odd_gap"] = sr.min_odd_gap;
  meta["failed_points"] = failed;
  meta["files"] = Json::array({"sweep.csv"});
  write_json(out / "meta.json", meta);
  std::printf("sweep: %d points along %s, min parity gaps %.3e / %.3e -> %s\n", a.points,
              a.axis.c_str(), sr.min_even_gap, sr.min_odd_gap, out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// husimi: phase-space density of a coherent seed or a Floquet eigenstate.

struct HusimiArgs {
  CommonArgs common;
  double p0 = 0.0, phi0 = 0.0;
  int floquet_state = -1;
  std::string cache_dir;
  int resolution = 201;
  double tol = 1e-10;
  bool long_format = false;
};

int run_husimi(const HusimiArgs& a) {
  const DimerParams p = resolve_params(a.common);
  const fs::path out = prepare_out(a.common);

  Json source;
  ManyBodyState state;
  if (a.floquet_state >= 0) {
    EvolveOptions opt;
    opt.tol = a.tol;
    const FloquetSolution fsol = floquet_solve_cached(p, opt, a.cache_dir);
    if (a.floquet_state >= fsol.states.cols())
      throw StructuralError("husimi: --floquet-state out of range");
    state = ManyBodyState{fsol.states.col(a.floquet_state), 0.0};
    source = Json{{"floquet_state", a.floquet_state},
                  {"quasienergy", fsol.quasienergies[a.floquet_state]},
                  {"parity", parity_name(fsol.parity[static_cast<std::size_t>(a.floquet_state)])}};
  } else {
    state = coherent_state(p, {a.p0, a.phi0});
    source = Json{{"coherent_seed", Json{{"p", a.p0}, {"phi", a.phi0}}}};
  }

  const HusimiGrid grid = husimi_grid(state, a.resolution, a.resolution);

  // Raw matrix block: one row per p value, comma-separated phi columns.
  std::string body;
  for (Eigen::Index i = 0; i < grid.q.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.q.cols(); ++j) {
      if (j) body += ',';
      body += CsvWriter::format_double(grid.q(i, j));
    }
    body += '\n';
  }
  write_text(out / "husimi.csv", body);

  CsvWriter paxis({"index", "p"});
  for (Eigen::Index i = 0; i < grid.p_axis.size(); ++i)
    paxis.append_row({static_cast<double>(i), grid.p_axis[i]});
  write_text(out / "p_axis.csv", paxis.body());
  CsvWriter phiaxis({"index", "phi"});
  for (Eigen::Index j = 0; j < grid.phi_axis.size(); ++j)
    phiaxis.append_row({static_cast<double>(j), grid.phi_axis[j]});
  write_text(out / "phi_axis.csv", phiaxis.body());

  std::vector<std::string> files{"husimi.csv", "p_axis.csv", "phi_axis.csv"};
  if (a.long_format) {
    CsvWriter lng({"p", "phi", "q"});
    for (Eigen::Index i = 0; i < grid.q.rows(); ++i)
      for (Eigen::Index j = 0; j < grid.q.cols(); ++j)
        lng.append_row({grid.p_axis[i], grid.phi_axis[j], grid.q(i, j)});
    write_text(out / "husimi_long.csv", lng.body());
    files.push_back("husimi_long.csv");
  }

  Json meta = meta_for("husimi", p, a.tol);
  meta["source"] = source;
  meta["resolution"] = a.resolution;
  meta["files"] = files;
  write_json(out / "meta.json", meta);
  std::printf("husimi: %dx%d grid -> %s\n", a.resolution, a.resolution, out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// poincare: stroboscopic section of the mean-field flow.

struct PoincareArgs {
  CommonArgs common;
  std::vector<std::string> seeds;
  int periods = 200;
};

int run_poincare(const PoincareArgs& a) {
  const DimerParams p = resolve_params(a.common);
  const fs::path out = prepare_out(a.common);
  const MeanFieldParams mf = MeanFieldParams::reduce(p);
  if (a.seeds.empty()) throw StructuralError("poincare: give at least one --seed p,phi");

  std::vector<PhasePoint> seeds;
  for (const auto& s : a.seeds) seeds.push_back(parse_point(s, "poincare --seed"));

  const auto traces = poincare_section(mf, seeds, a.periods);

  CsvWriter csv({"seed_id", "iterate", "p", "phi"});
  Json aborted = Json::array();
  for (const auto& tr : traces) {
    for (std::size_t i = 0; i < tr.points.size(); ++i)
      csv.append_cells({std::to_string(tr.seed_id), std::to_string(i),
                        CsvWriter::format_double(tr.points[i].p),
                        CsvWriter::format_double(tr.points[i].phi)});
    if (tr.aborted)
      aborted.push_back(Json{{"seed_id", tr.seed_id}, {"abort_tau", tr.abort_tau}});
  }
  write_text(out / "section.csv", csv.body());

  Json meta = meta_for("poincare", p, FlowOptions{}.rtol);
  Json seed_list = Json::array();
  for (const auto& s : seeds) seed_list.push_back(Json{{"p", s.p}, {"phi", s.phi}});
  meta["seeds"] = seed_list;
  meta["n_periods"] = a.periods;
  meta["aborted"] = aborted;
  meta["files"] = Json::array({"section.csv"});
  write_json(out / "meta.json", meta);
  std::printf("poincare: %zu seeds x %d periods -> %s\n", seeds.size(), a.periods,
              out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// orbit: Newton-refine a periodic point of the stroboscopic map.

struct OrbitArgs {
  CommonArgs common;
  double p0 = 0.0, phi0 = 0.0;
  int k = 1;
  double tol = 1e-10;
};

int run_orbit(const OrbitArgs& a) {
  const DimerParams p = resolve_params(a.common);
  const fs::path out = prepare_out(a.common);
  const MeanFieldParams mf = MeanFieldParams::reduce(p);

  OrbitSearchOptions opt;
  opt.tol = a.tol;
  const PeriodicOrbit orb = find_periodic_orbit(mf, {a.p0, a.phi0}, a.k, opt);

  CsvWriter csv({"iterate", "p", "phi"});
  PhasePoint x = orb.point;
  for (int i = 0; i < orb.k; ++i) {
    csv.append_cells({std::to_string(i), CsvWriter::format_double(x.p),
                      CsvWriter::format_double(wrap_angle(x.phi))});
    x = poincare_map(mf, x, 1);
  }
  write_text(out / "iterates.csv", csv.body());

  Json meta = meta_for("orbit", p, a.tol);
  meta["k"] = orb.k;
  meta["point"] = Json{{"p", orb.point.p}, {"phi", orb.point.phi}};
  meta["elliptic"] = orb.elliptic;
  meta["stability_angle"] = orb.stability_angle;
  meta["residue"] = orb.residue;
  meta["residual"] = orb.residual;
  meta["iterations"] = orb.iterations;
  meta["files"] = Json::array({"iterates.csv"});
  write_json(out / "orbit.json", meta);
  std::printf("orbit: k = %d point (%.6f, %.6f), %s, angle %.6f -> %s\n", orb.k, orb.point.p,
              orb.point.phi, orb.elliptic ? "elliptic" : "hyperbolic", orb.stability_angle,
              out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// tube: trace the invariant curve through a given displacement from a center.

struct TubeArgs {
  CommonArgs common;
  double center_p = 0.0, center_phi = 0.0;
  int k = 1;
  double displacement = 0.05;
};

int run_tube(const TubeArgs& a) {
  const DimerParams p = resolve_params(a.common);
  const fs::path out = prepare_out(a.common);
  const MeanFieldParams mf = MeanFieldParams::reduce(p);
  if (a.displacement <= 0.0) throw StructuralError("tube: --displacement must be positive");

  const PeriodicOrbit center = find_periodic_orbit(mf, {a.center_p, a.center_phi}, a.k);
  const PhasePoint seed{center.point.p + a.displacement, center.point.phi};
  InvariantCurve curve = trace_invariant_curve(mf, seed, a.k, {}, &center.point);
  const double action = contour_action(mf, curve);

  CsvWriter csv({"index", "p", "phi"});
  for (std::size_t i = 0; i < curve.section_points.size(); ++i)
    csv.append_cells({std::to_string(i), CsvWriter::format_double(curve.section_points[i].p),
                      CsvWriter::format_double(curve.section_points[i].phi)});
  write_text(out / "tube.csv", csv.body());

  Json meta = meta_for("tube", p, TraceOptions{}.max_gap);
  meta["k"] = a.k;
  meta["action"] = action;
  meta["center"] = Json{{"p", center.point.p}, {"phi", center.point.phi}};
  meta["stability_angle"] = center.stability_angle;
  meta["seed"] = Json{{"p", seed.p}, {"phi", seed.phi}};
  meta["n_points"] = curve.section_points.size();
  meta["files"] = Json::array({"tube.csv"});
  write_json(out / "tube.json", meta);
  std::printf("tube: k = %d action %.6f (%zu points) -> %s\n", a.k, action,
              curve.section_points.size(), out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// requantize: quantized tubes inside an island, optionally matched to exact
// Floquet states.

struct RequantizeArgs {
  CommonArgs common;
  double center_p = 0.0, center_phi = 0.0;
  int k = 1;
  std::string n_list = "0";
  std::string cache_dir;
  double tol = 1e-10;
  bool no_match = false;
};

int run_requantize(const RequantizeArgs& a) {
  const DimerParams p = resolve_params(a.common);
  const fs::path out = prepare_out(a.common);
  const MeanFieldParams mf = MeanFieldParams::reduce(p);
  const std::vector<int> n_list = parse_int_list(a.n_list, "requantize --n-list");

  const PeriodicOrbit center = find_periodic_orbit(mf, {a.center_p, a.center_phi}, a.k);
  auto results = quantize_island(mf, center.point, a.k, p, n_list);

  std::vector<QuantizedTube> tubes;
  for (auto& r : results)
    if (r.fits) {
      semiclassical_quasienergy(mf, p, *r.tube);
      tubes.push_back(*r.tube);
    }
  if (tubes.empty())
    throw PhysicsRejection("requantize: no requested tube fits inside the island at N = " +
                           std::to_string(p.n));

  std::vector<TubeAssignment> matches;
  if (!a.no_match) {
    EvolveOptions opt;
    opt.tol = a.tol;
    const FloquetSolution fsol = floquet_solve_cached(p, opt, a.cache_dir);
    matches = match_states_to_tubes(p, fsol, tubes, mf);
  }

  Json records = Json::array();
  for (const auto& r : results) {
    Json rec{{"n", r.n}, {"fits", r.fits}};
    if (r.fits) {
      rec["action"] = r.tube->action;
      rec["target_action"] = r.tube->target_action;
      rec["seed_displacement"] = r.tube->seed_displacement;
    } else {
      rec["note"] = r.note;
    }
    records.push_back(rec);
  }

  CsvWriter csv({"n", "action", "eps_semiclassical", "eps_exact", "residual", "state_index"});
  for (std::size_t i = 0; i < tubes.size(); ++i) {
    const double eps_exact = a.no_match ? std::nan("") : matches[i].eps_exact;
    const double residual = a.no_match ? std::nan("") : matches[i].residual;
    const int state_index = a.no_match ? -1 : matches[i].state_index;
    csv.append_cells({std::to_string(tubes[i].n), CsvWriter::format_double(tubes[i].action),
                      CsvWriter::format_double(tubes[i].eps_semiclassical),
                      CsvWriter::format_double(eps_exact), CsvWriter::format_double(residual),
                      std::to_string(state_index)});
  }
  write_text(out / "mapping.csv", csv.body());

  Json meta = meta_for("requantize", p, a.tol);
  meta["k"] = a.k;
  meta["center"] = Json{{"p", center.point.p}, {"phi", center.point.phi}};
  meta["subzone_width"] = subzone_width(p, a.k);
  meta["tubes"] = records;
  meta["matched"] = !a.no_match;
  meta["files"] = Json::array({"mapping.csv"});
  write_json(out / "tubes.json", meta);
  std::printf("requantize: %zu of %zu tubes fit -> %s\n", tubes.size(), results.size(),
              out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// experiment / validate: preset bundles and their acceptance checks.

struct ExperimentArgs {
  CommonArgs common;
  std::string preset;
  std::string cache_dir;
  double tol = 1e-10;
};

// The experiment layer takes raw key=value overrides (model parameters plus
// harness keys like p0 or horizon_periods), so the config file is forwarded
// line by line instead of through parse_params.
std::map<std::string, std::string> read_raw_config(const std::string& path) {
  std::map<std::string, std::string> m;
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open config: " + path);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw StructuralError("config line without '=': '" + line + "'");
    m[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return m;
}

int run_experiment_cmd(const ExperimentArgs& a) {
  ExperimentSpec spec;
  spec.preset = preset_from_name(a.preset);
  if (!a.common.config_path.empty()) spec.overrides = read_raw_config(a.common.config_path);
  for (const auto& [k, v] : parse_sets(a.common.sets)) spec.overrides[k] = v;
  spec.out_dir = a.common.out_dir;
  spec.cache_dir = a.cache_dir;
  spec.tolerance = a.tol;

  const ExperimentSummary summary = run_experiment(spec);
  std::printf("experiment %s: %zu files in %s (%.1f s)\n", preset_name(summary.preset).c_str(),
              summary.files.size(), summary.bundle_dir.string().c_str(), summary.wall_time_s);
  return 0;
}

int run_validate(const std::string& bundle) {
  const ValidationReport report = validate_bundle(bundle);
  std::fputs(report.text.c_str(), stdout);
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driven two-site boson model toolkit"};
  app.require_subcommand(1);

  EvolveArgs ev;
  CLI::App* evolve = app.add_subcommand("evolve", "strobe a coherent state");
  add_common(evolve, ev.common);
  evolve->add_option("--p0", ev.p0, "seed momentum");
  evolve->add_option("--phi0", ev.phi0, "seed phase");
  evolve->add_option("--periods", ev.periods, "horizon in drive periods")->check(CLI::PositiveNumber);
  evolve->add_option("--samples-per-period", ev.samples, "samples per period")
      ->check(CLI::PositiveNumber);
  evolve->add_option("--tol", ev.tol, "integrator tolerance");
  evolve->add_flag("--occupation", ev.occupation, "also write Fock occupations");

  FloquetArgs fl;
  CLI::App* floq = app.add_subcommand("floquet", "one-period Floquet decomposition");
  add_common(floq, fl.common);
  floq->add_option("--cache", fl.cache_dir, "decomposition cache directory");
  floq->add_option("--tol", fl.tol, "integrator tolerance");

  SweepArgs sw;
  CLI::App* sweep = app.add_subcommand("sweep", "quasienergies along a parameter grid");
  add_common(sweep, sw.common);
  sweep->add_option("--axis", sw.axis, "mu or omega_drive");
  sweep->add_option("--from", sw.from, "grid start")->required();
  sweep->add_option("--to", sw.to, "grid end")->required();
  sweep->add_option("--points", sw.points, "grid size")->required();
  sweep->add_option("--tol", sw.tol, "integrator tolerance");

  HusimiArgs hu;
  CLI::App* husimi = app.add_subcommand("husimi", "phase-space density grid");
  add_common(husimi, hu.common);
  husimi->add_option("--p0", hu.p0, "coherent seed momentum");
  husimi->add_option("--phi0", hu.phi0, "coherent seed phase");
  husimi->add_option("--floquet-state", hu.floquet_state,
                     "index of a Floquet state to plot instead of a coherent seed");
  husimi->add_option("--cache", hu.cache_dir, "Floquet cache directory");
  husimi->add_option("--resolution", hu.resolution, "grid resolution per axis")
      ->check(CLI::Range(2, 4096));
  husimi->add_option("--tol", hu.tol, "integrator tolerance");
  husimi->add_flag("--long", hu.long_format, "also write three-column p,phi,q layout");

  PoincareArgs po;
  CLI::App* poincare = app.add_subcommand("poincare", "stroboscopic section");
  add_common(poincare, po.common);
  poincare->add_option("--seed", po.seeds, "seed as p,phi; repeatable")->required();
  poincare->add_option("--periods", po.periods, "iterates per seed")->check(CLI::PositiveNumber);

  OrbitArgs ob;
  CLI::App* orbit = app.add_subcommand("orbit", "refine a periodic point");
  add_common(orbit, ob.common);
  orbit->add_option("--p0", ob.p0, "initial guess momentum")->required();
  orbit->add_option("--phi0", ob.phi0, "initial guess phase");
  orbit->add_option("--k", ob.k, "period multiplicity")->check(CLI::PositiveNumber);
  orbit->add_option("--tol", ob.tol, "Newton tolerance");

  TubeArgs tu;
  CLI::App* tube = app.add_subcommand("tube", "trace an invariant curve");
  add_common(tube, tu.common);
  tube->add_option("--center-p", tu.center_p, "island center guess, momentum")->required();
  tube->add_option("--center-phi", tu.center_phi, "island center guess, phase");
  tube->add_option("--k", tu.k, "period multiplicity")->check(CLI::PositiveNumber);
  tube->add_option("--displacement", tu.displacement, "seed offset from the center")->required();

  RequantizeArgs rq;
  CLI::App* requantize = app.add_subcommand("requantize", "quantized tubes inside an island");
  add_common(requantize, rq.common);
  requantize->add_option("--center-p", rq.center_p, "island center guess, momentum")->required();
  requantize->add_option("--center-phi", rq.center_phi, "island center guess, phase");
  requantize->add_option("--k", rq.k, "period multiplicity")->check(CLI::PositiveNumber);
  requantize->add_option("--n-list", rq.n_list, "comma-separated quantum numbers");
  requantize->add_option("--cache", rq.cache_dir, "Floquet cache directory");
  requantize->add_option("--tol", rq.tol, "integrator tolerance");
  requantize->add_flag("--no-match", rq.no_match, "skip the exact Floquet matching");

  ExperimentArgs ex;
  CLI::App* experiment = app.add_subcommand("experiment", "run a figure preset bundle");
  add_common(experiment, ex.common);
  experiment->add_option("--preset", ex.preset, "fig1|fig2|fig3|fig5|fig6|fig7|fig8|fig9a|fig9b|custom")
      ->required();
  experiment->add_option("--cache", ex.cache_dir, "Floquet cache directory");
  experiment->add_option("--tol", ex.tol, "integrator tolerance");

  std::string bundle_dir;
  CLI::App* validate = app.add_subcommand("validate", "check a bundle against its thresholds");
  validate->add_option("bundle", bundle_dir, "bundle directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (evolve->parsed()) return run_evolve(ev);
    if (floq->parsed()) return run_floquet(fl);
    if (sweep->parsed()) return run_sweep(sw);
    if (husimi->parsed()) return run_husimi(hu);
    if (poincare->parsed()) return run_poincare(po);
    if (orbit->parsed()) return run_orbit(ob);
    if (tube->parsed()) return run_tube(tu);
    if (requantize->parsed()) return run_requantize(rq);
    if (experiment->parsed()) return run_experiment_cmd(ex);
    if (validate->parsed()) return run_validate(bundle_dir);
  } catch (const PhysicsRejection& e) {
    std::fprintf(stderr, "rejected: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
