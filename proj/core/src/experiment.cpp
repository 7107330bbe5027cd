#include "dimerlab/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "dimerlab/coherent.hpp"
#include "dimerlab/io.hpp"
#include "dimerlab/meanfield.hpp"
#include "dimerlab/model.hpp"
#include "dimerlab/semiclassics.hpp"
#include "dimerlab/version.hpp"

namespace dimerlab {

namespace {

constexpr double kPi = std::numbers::pi;

constexpr std::pair<Preset, const char*> kPresetNames[] = {
    {Preset::fig1, "fig1"},   {Preset::fig2, "fig2"}, {Preset::fig3, "fig3"},
    {Preset::fig5, "fig5"},   {Preset::fig6, "fig6"}, {Preset::fig7, "fig7"},
    {Preset::fig8, "fig8"},   {Preset::fig9a, "fig9a"}, {Preset::fig9b, "fig9b"},
    {Preset::custom, "custom"},
};

double parse_double_strict(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw StructuralError("override " + key + ": cannot parse '" + text + "'");
  }
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos != text.size())
    throw StructuralError("override " + key + ": trailing characters in '" + text + "'");
  return v;
}

int parse_int_strict(const std::string& key, const std::string& text) {
  const double v = parse_double_strict(key, text);
  const int i = static_cast<int>(std::llround(v));
  if (std::abs(v - i) > 0.0)
    throw StructuralError("override " + key + ": expected an integer, got '" + text + "'");
  return i;
}

std::vector<int> parse_n_list(const std::string& text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string cell =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (cell.empty()) throw StructuralError("n_list: empty entry in '" + text + "'");
    const int n = parse_int_strict("n_list", cell);
    if (n < 0) throw StructuralError("n_list: negative quantum number " + std::to_string(n));
    out.push_back(n);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw StructuralError("n_list: no entries");
  return out;
}

// Everything a runner needs, resolved from preset defaults plus overrides.
struct Plan {
  DimerParams params; // defaults already encode the paper's parameter triple
  double p0 = -0.497;
  double phi0 = 0.0;
  int horizon_periods = 16;
  int samples_per_period = 24;
  int grid_resolution = 201;
  int section_periods = 400;
  std::vector<int> n_list;
};

Plan resolve_plan(const ExperimentSpec& spec) {
  Plan plan;
  switch (spec.preset) {
    case Preset::fig1:
      break;
    case Preset::fig2:
      break;
    case Preset::fig3:
      // The published quantum-number ladder, rescaled from N = 10000 to the
      // desk-scale default N = 2000 (hbar_eff grows by 5, n shrinks by 5).
      plan.n_list = {0, 22, 39, 55, 153, 194, 283, 334};
      break;
    case Preset::fig5:
      break;
    case Preset::fig6:
      break;
    case Preset::fig7:
      plan.horizon_periods = 12;
      plan.samples_per_period = 4;
      break;
    case Preset::fig8:
      plan.p0 = -0.4278;
      plan.section_periods = 600;
      break;
    case Preset::fig9a:
      plan.p0 = -0.4278;
      plan.horizon_periods = 40;
      plan.samples_per_period = 8;
      break;
    case Preset::fig9b:
      plan.p0 = -0.4278;
      plan.horizon_periods = 40;
      plan.samples_per_period = 8;
      plan.params.n = 5000;
      plan.params.kappa = 0.92 / 5000.0;
      break;
    case Preset::custom:
      plan.samples_per_period = 8;
      break;
  }

  std::map<std::string, std::string> model_kv;
  double alpha_override = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [key, value] : spec.overrides) {
    if (key == "alpha")
      alpha_override = parse_double_strict(key, value);
    else if (key == "p0")
      plan.p0 = parse_double_strict(key, value);
    else if (key == "phi0")
      plan.phi0 = parse_double_strict(key, value);
    else if (key == "horizon_periods")
      plan.horizon_periods = parse_int_strict(key, value);
    else if (key == "samples_per_period")
      plan.samples_per_period = parse_int_strict(key, value);
    else if (key == "grid_resolution")
      plan.grid_resolution = parse_int_strict(key, value);
    else if (key == "section_periods")
      plan.section_periods = parse_int_strict(key, value);
    else if (key == "n_list")
      plan.n_list = parse_n_list(value);
    else
      model_kv[key] = value;
  }
  plan.params = apply_overrides(plan.params, model_kv);
  if (!std::isnan(alpha_override))
    plan.params.kappa = alpha_override * plan.params.omega / plan.params.n;
  plan.params.validate();
  if (plan.horizon_periods < 1 || plan.samples_per_period < 1)
    throw StructuralError("plan: horizon_periods and samples_per_period must be >= 1");
  if (plan.grid_resolution < 16)
    throw StructuralError("plan: grid_resolution must be >= 16");
  if (plan.section_periods < 1) throw StructuralError("plan: section_periods must be >= 1");
  return plan;
}

struct BundleWriter {
  std::filesystem::path dir;
  std::vector<std::string> files;
  Json extra; // preset-specific summary fields

  explicit BundleWriter(const std::filesystem::path& d) : dir(d), extra(Json::object()) {
    std::filesystem::create_directories(dir);
    files.push_back("summary.json");
  }
  void add_csv(const std::string& name, const CsvWriter& csv) {
    csv.write(dir / name);
    files.push_back(name);
  }
  void add_json(const std::string& name, const Json& j) {
    write_json(dir / name, j);
    files.push_back(name);
  }
};

Json params_json(const DimerParams& p) {
  return Json{{"n_particles", p.n},
              {"omega_hop", p.omega},
              {"kappa", p.kappa},
              {"mu", p.mu},
              {"omega_drive", p.omega_drive}};
}

std::string config_fingerprint(const ExperimentSpec& spec, const Plan& plan) {
  std::string blob = "preset=" + preset_name(spec.preset) + "\n" + params_to_config(plan.params);
  blob += "tolerance=" + CsvWriter::format_double(spec.tolerance) + "\n";
  blob += "p0=" + CsvWriter::format_double(plan.p0) + "\n";
  blob += "phi0=" + CsvWriter::format_double(plan.phi0) + "\n";
  blob += "horizon_periods=" + std::to_string(plan.horizon_periods) + "\n";
  blob += "samples_per_period=" + std::to_string(plan.samples_per_period) + "\n";
  blob += "grid_resolution=" + std::to_string(plan.grid_resolution) + "\n";
  blob += "section_periods=" + std::to_string(plan.section_periods) + "\n";
  for (int n : plan.n_list) blob += "n_list+=" + std::to_string(n) + "\n";
  for (const auto& [k, v] : spec.overrides) blob += "set " + k + "=" + v + "\n";
  return fnv1a_hex(blob);
}

std::vector<PhasePoint> resample(const std::vector<PhasePoint>& pts, std::size_t count) {
  count = std::min(count, pts.size());
  std::vector<PhasePoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(pts[i * pts.size() / count]);
  return out;
}

Json polygon_json(const std::vector<PhasePoint>& pts) {
  Json arr = Json::array();
  for (const auto& q : pts) arr.push_back(Json::array({q.p, q.phi}));
  return arr;
}

std::vector<PhasePoint> polygon_from_json(const Json& arr) {
  std::vector<PhasePoint> out;
  for (const auto& cell : arr) out.push_back({cell.at(0).get<double>(), cell.at(1).get<double>()});
  return out;
}

std::vector<PhasePoint> orbit_points(const MeanFieldParams& mf, const PeriodicOrbit& orbit) {
  std::vector<PhasePoint> pts;
  PhasePoint x = orbit.point;
  for (int i = 0; i < orbit.k; ++i) {
    pts.push_back({x.p, wrap_angle(x.phi)});
    x = poincare_map(mf, x, 1);
  }
  return pts;
}

Json orbit_json(const std::string& label, const MeanFieldParams& mf, const PeriodicOrbit& o) {
  Json j{{"label", label},
         {"k", o.k},
         {"p", o.point.p},
         {"phi", o.point.phi},
         {"trace", o.trace},
         {"elliptic", o.elliptic},
         {"stability_angle", o.stability_angle},
         {"residue", o.residue},
         {"residual", o.residual}};
  Json pts = Json::array();
  for (const auto& q : orbit_points(mf, o)) pts.push_back(Json::array({q.p, q.phi}));
  j["points"] = pts;
  return j;
}

// The main island's period-1 center has no published coordinates; Newton from
// a short deterministic guess list finds it.
PeriodicOrbit locate_main_center(const MeanFieldParams& mf) {
  const PhasePoint guesses[] = {{0.0, 0.0},  {-0.1, 0.0}, {0.1, 0.0},
                                {0.0, 0.4},  {0.0, -0.4}, {-0.2, 0.0}};
  std::string last_error = "no guesses";
  for (const PhasePoint& g : guesses) {
    try {
      PeriodicOrbit o = find_periodic_orbit(mf, g, 1);
      if (o.converged && o.elliptic && std::abs(o.point.p) < 0.9) return o;
      last_error = "converged to a non-elliptic or far point from guess (" +
                   std::to_string(g.p) + ", " + std::to_string(g.phi) + ")";
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
  }
  throw PhysicsRejection("main island center not found: " + last_error);
}

// The half-period parity (p, phi, tau) -> (-p, -phi, tau + dtau/2) maps the
// two period-3 chains onto each other; pulling the image back to the tau = 0
// section seeds the partner orbit.
PeriodicOrbit second_chain_orbit(const MeanFieldParams& mf, const PeriodicOrbit& first) {
  const PhasePoint back = flow(mf, first.point, 0.0, -0.5 * mf.dtau());
  const PhasePoint seed{-back.p, wrap_angle(-back.phi)};
  PeriodicOrbit second = find_periodic_orbit(mf, seed, first.k);
  for (const PhasePoint& q : orbit_points(mf, first))
    if (std::hypot(second.point.p - q.p, wrap_angle(second.point.phi - q.phi)) < 1e-4)
      throw PhysicsRejection("partner period-" + std::to_string(first.k) +
                             " orbit collapsed onto the first chain");
  return second;
}

CsvWriter grid_csv(const HusimiGrid& g, const Eigen::MatrixXd& q) {
  CsvWriter csv({"p", "phi", "q"});
  for (Eigen::Index i = 0; i < g.p_axis.size(); ++i)
    for (Eigen::Index j = 0; j < g.phi_axis.size(); ++j)
      csv.append_row({g.p_axis[i], g.phi_axis[j], q(i, j)});
  return csv;
}

void write_return_series(const ExperimentSpec& spec, const Plan& plan, BundleWriter& b) {
  const ManyBodyState psi0 = coherent_state(plan.params, {plan.p0, plan.phi0});
  EvolveOptions eopt;
  eopt.tol = spec.tolerance;
  const TimeSeries ts = return_probability_series(plan.params, psi0, plan.horizon_periods,
                                                  plan.samples_per_period, eopt);
  CsvWriter csv({"time", "periods", "return_probability"});
  const double period = plan.params.period();
  for (Eigen::Index i = 0; i < ts.times.size(); ++i)
    csv.append_row({ts.times[i], ts.times[i] / period, ts.values[i]});
  b.add_csv("return_probability.csv", csv);
  b.extra["seed"] = Json{{"p", plan.p0}, {"phi", plan.phi0}};
}

void run_return_preset(const ExperimentSpec& spec, const Plan& plan, BundleWriter& b,
                       std::string& stage) {
  stage = "evolution";
  write_return_series(spec, plan, b);
}

void run_fig7(const ExperimentSpec& spec, const Plan& plan, BundleWriter& b,
              std::string& stage) {
  stage = "evolution";
  write_return_series(spec, plan, b);
  const ManyBodyState psi0 = coherent_state(plan.params, {plan.p0, plan.phi0});
  EvolveOptions eopt;
  eopt.tol = spec.tolerance;
  const OccupationSeries os = fock_occupation_series(plan.params, psi0, plan.horizon_periods,
                                                     plan.samples_per_period, eopt);
  stage = "dataset write";
  std::vector<std::string> header{"time"};
  for (int j = 0; j < plan.params.dim(); ++j) header.push_back("j" + std::to_string(j));
  CsvWriter csv(std::move(header));
  std::vector<double> row(static_cast<std::size_t>(plan.params.dim()) + 1);
  for (Eigen::Index s = 0; s < os.times.size(); ++s) {
    row[0] = os.times[s];
    for (int j = 0; j < plan.params.dim(); ++j)
      row[static_cast<std::size_t>(j) + 1] = os.occupation(j, s);
    csv.append_row(row);
  }
  b.add_csv("occupation.csv", csv);
}

void append_section_csv(const std::vector<SeedTrace>& traces, CsvWriter& csv) {
  for (const SeedTrace& tr : traces)
    for (std::size_t i = 0; i < tr.points.size(); ++i)
      csv.append_row({static_cast<double>(tr.seed_id), static_cast<double>(i), tr.points[i].p,
                      tr.points[i].phi});
}

void run_fig2(const ExperimentSpec&, const Plan& plan, BundleWriter& b, std::string& stage) {
  const MeanFieldParams mf = MeanFieldParams::reduce(plan.params);
  stage = "poincare section";
  std::vector<PhasePoint> seeds;
  for (int i = 0; i < 25; ++i) seeds.push_back({-0.96 + 0.08 * i, 0.0});
  for (int i = 0; i < 13; ++i) seeds.push_back({-0.9 + 0.15 * i, kPi});
  seeds.push_back({-0.497, 0.0});
  seeds.push_back({-0.4278, 0.0});
  const auto traces = poincare_section(mf, seeds, plan.section_periods);
  CsvWriter csv({"seed_id", "iterate", "p", "phi"});
  append_section_csv(traces, csv);
  b.add_csv("section.csv", csv);

  stage = "orbit search";
  const PeriodicOrbit main = locate_main_center(mf);
  const PeriodicOrbit chain_a = find_periodic_orbit(mf, {-0.497, 0.0}, 3);
  const PeriodicOrbit chain_b = second_chain_orbit(mf, chain_a);
  Json orbits = Json::array();
  orbits.push_back(orbit_json("main", mf, main));
  orbits.push_back(orbit_json("chain_a", mf, chain_a));
  orbits.push_back(orbit_json("chain_b", mf, chain_b));
  b.add_json("orbits.json", Json{{"orbits", orbits}});
  b.extra["main_center"] = Json{{"p", main.point.p}, {"phi", main.point.phi}};
}

void run_fig8(const ExperimentSpec&, const Plan& plan, BundleWriter& b, std::string& stage) {
  const MeanFieldParams mf = MeanFieldParams::reduce(plan.params);
  stage = "poincare section";
  std::vector<PhasePoint> seeds;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) seeds.push_back({-0.47 + 0.02125 * i, -0.3 + 0.15 * j});
  seeds.push_back({plan.p0, plan.phi0});
  const auto traces = poincare_section(mf, seeds, plan.section_periods);
  CsvWriter csv({"seed_id", "iterate", "p", "phi"});
  append_section_csv(traces, csv);
  b.add_csv("section.csv", csv);

  stage = "orbit search";
  const PeriodicOrbit third = find_periodic_orbit(mf, {plan.p0, plan.phi0}, 18);
  const int minimal = tube_period(mf, third.point, 24);
  Json j = orbit_json("third_order", mf, third);
  j["minimal_period"] = minimal;
  b.add_json("orbits.json", Json{{"orbits", Json::array({j})}});
}

void run_fig3(const ExperimentSpec& spec, const Plan& plan, BundleWriter& b,
              std::string& stage) {
  const DimerParams& params = plan.params;
  const MeanFieldParams mf = MeanFieldParams::reduce(params);
  stage = "orbit search";
  const PeriodicOrbit main = locate_main_center(mf);

  stage = "quantization";
  QuantizeOptions qopt;
  auto searches = quantize_island(mf, main.point, 1, params, plan.n_list, qopt);
  std::vector<QuantizedTube> tubes;
  Json search_rows = Json::array();
  for (auto& r : searches) {
    Json row{{"n", r.n}, {"fits", r.fits}};
    if (!r.note.empty()) row["note"] = r.note;
    if (r.fits) {
      row["action"] = r.tube->action;
      row["target_action"] = r.tube->target_action;
      row["seed_displacement"] = r.tube->seed_displacement;
      tubes.push_back(std::move(*r.tube));
    }
    search_rows.push_back(std::move(row));
  }
  if (tubes.empty()) throw PhysicsRejection("no quantized tube fits the main island");

  stage = "floquet";
  EvolveOptions eopt;
  eopt.tol = spec.tolerance;
  const FloquetSolution fs = floquet_solve_cached(params, eopt, spec.cache_dir);

  stage = "matching";
  const auto matches = match_states_to_tubes(params, fs, tubes, mf);

  stage = "island boundary";
  const InvariantCurve boundary = island_boundary(mf, main.point, 1, qopt);

  stage = "husimi";
  CsvWriter map_csv({"n", "action", "eps_semiclassical", "eps_exact", "residual", "state_index"});
  Json match_rows = Json::array();
  int lowest_n = tubes.front().n;
  for (const auto& t : tubes) lowest_n = std::min(lowest_n, t.n);
  bool ground_written = false;
  for (std::size_t i = 0; i < tubes.size(); ++i) {
    const TubeAssignment& m = matches[i];
    map_csv.append_row({static_cast<double>(tubes[i].n), tubes[i].action, m.eps_semiclassical,
                        m.eps_exact, m.residual, static_cast<double>(m.state_index)});
    const ManyBodyState state{fs.states.col(m.state_index), 0.0};
    const HusimiGrid g = husimi_grid(state, plan.grid_resolution, plan.grid_resolution);
    Eigen::Index ai = 0, aj = 0;
    g.q.maxCoeff(&ai, &aj);
    const PhasePoint argmax{g.p_axis[ai], g.phi_axis[aj]};
    match_rows.push_back(Json{{"n", tubes[i].n},
                              {"state_index", m.state_index},
                              {"score", m.score},
                              {"runner_up", m.runner_up},
                              {"ambiguous", m.ambiguous},
                              {"argmax", Json{{"p", argmax.p}, {"phi", argmax.phi}}},
                              {"argmax_inside_island",
                               point_in_polygon(boundary.section_points, argmax)}});
    if (tubes[i].n == lowest_n && !ground_written) {
      b.add_csv("husimi_ground.csv", grid_csv(g, g.q));
      ground_written = true;
    }
  }
  b.add_csv("requantization.csv", map_csv);
  b.add_json("tubes.json",
             Json{{"search", search_rows},
                  {"matches", match_rows},
                  {"center", Json{{"p", main.point.p}, {"phi", main.point.phi}}},
                  {"island_boundary", polygon_json(resample(boundary.section_points, 160))}});
  b.extra["subzone_width"] = subzone_width(params, 1); // scaled units, k = 1
}

void run_fig5(const ExperimentSpec&, const Plan& plan, BundleWriter& b, std::string& stage) {
  const DimerParams& params = plan.params;
  const MeanFieldParams mf = MeanFieldParams::reduce(params);
  stage = "orbit search";
  const PeriodicOrbit main = locate_main_center(mf);
  const PeriodicOrbit chain = find_periodic_orbit(mf, {-0.497, 0.0}, 3);

  stage = "quantization";
  QuantizeOptions qmain;
  auto rmain = quantize_island(mf, main.point, 1, params, {0}, qmain);
  if (!rmain.front().fits)
    throw PhysicsRejection("main-island n=0 tube does not fit: " + rmain.front().note);
  QuantizeOptions qsec;
  qsec.s_init = 0.01;
  auto rsec = quantize_island(mf, chain.point, 3, params, {0}, qsec);
  if (!rsec.front().fits)
    throw PhysicsRejection("secondary-island n=0 tube does not fit: " + rsec.front().note);
  const QuantizedTube tube_main = std::move(*rmain.front().tube);
  const QuantizedTube tube_sec = std::move(*rsec.front().tube);

  stage = "tube projection";
  CsvWriter csv({"tube", "k", "n", "point_id", "sample", "tau", "p", "phi"});
  int label = 0;
  for (const QuantizedTube* tube : {&tube_main, &tube_sec}) {
    const auto pts = resample(tube->curve.section_points, 48);
    const int samples = 40 * tube->k;
    const double span = tube->k * mf.dtau();
    for (std::size_t pid = 0; pid < pts.size(); ++pid) {
      PhasePoint x = pts[pid];
      csv.append_row({static_cast<double>(label), static_cast<double>(tube->k),
                      static_cast<double>(tube->n), static_cast<double>(pid), 0.0, 0.0, x.p,
                      wrap_angle(x.phi)});
      for (int s = 1; s <= samples; ++s) {
        const double t0 = span * (s - 1) / samples;
        const double t1 = span * s / samples;
        x = flow(mf, x, t0, t1);
        csv.append_row({static_cast<double>(label), static_cast<double>(tube->k),
                        static_cast<double>(tube->n), static_cast<double>(pid),
                        static_cast<double>(s), t1, x.p, wrap_angle(x.phi)});
      }
    }
    ++label;
  }
  b.add_csv("tube_projection.csv", csv);
  b.extra["tubes"] = Json::array({Json{{"label", 0},
                                       {"k", tube_main.k},
                                       {"n", tube_main.n},
                                       {"action", tube_main.action},
                                       {"target_action", tube_main.target_action}},
                                  Json{{"label", 1},
                                       {"k", tube_sec.k},
                                       {"n", tube_sec.n},
                                       {"action", tube_sec.action},
                                       {"target_action", tube_sec.target_action}}});
}

void run_fig6(const ExperimentSpec& spec, const Plan& plan, BundleWriter& b,
              std::string& stage) {
  const DimerParams& params = plan.params;
  const MeanFieldParams mf = MeanFieldParams::reduce(params);
  stage = "orbit search";
  const PeriodicOrbit chain_a = find_periodic_orbit(mf, {-0.497, 0.0}, 3);
  if (!chain_a.elliptic) throw PhysicsRejection("secondary chain center is not elliptic");
  const PeriodicOrbit chain_b = second_chain_orbit(mf, chain_a);
  std::vector<PhasePoint> centers = orbit_points(mf, chain_a);
  for (const auto& q : orbit_points(mf, chain_b)) centers.push_back(q);

  stage = "island boundary";
  QuantizeOptions qopt;
  qopt.s_init = 0.01;
  std::vector<InvariantCurve> boundaries;
  for (const PhasePoint& c : centers) boundaries.push_back(island_boundary(mf, c, 3, qopt));

  stage = "floquet";
  EvolveOptions eopt;
  eopt.tol = spec.tolerance;
  const FloquetSolution fs = floquet_solve_cached(params, eopt, spec.cache_dir);

  stage = "matching";
  std::vector<PhasePoint> probes;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    probes.push_back(centers[i]);
    for (const PhasePoint& v : resample(boundaries[i].section_points, 32))
      probes.push_back({centers[i].p + 0.55 * (v.p - centers[i].p),
                        centers[i].phi + 0.55 * (v.phi - centers[i].phi)});
  }
  Matrix coh(params.dim(), static_cast<Eigen::Index>(probes.size()));
  for (std::size_t i = 0; i < probes.size(); ++i)
    coh.col(static_cast<Eigen::Index>(i)) = coherent_state(params, probes[i]).amps;
  const Eigen::VectorXd score =
      (coh.adjoint() * fs.states).cwiseAbs2().colwise().mean().transpose();
  std::vector<int> idx(static_cast<std::size_t>(params.dim()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::partial_sort(idx.begin(), idx.begin() + 6, idx.end(),
                    [&score](int a, int b) { return score[a] > score[b]; });
  std::vector<int> sextet(idx.begin(), idx.begin() + 6);
  std::sort(sextet.begin(), sextet.end());

  stage = "husimi";
  Eigen::MatrixXd q_sum;
  HusimiGrid axes;
  for (int s : sextet) {
    const ManyBodyState state{fs.states.col(s), 0.0};
    HusimiGrid g = husimi_grid(state, plan.grid_resolution, plan.grid_resolution);
    if (q_sum.size() == 0) {
      q_sum = g.q;
      axes = std::move(g);
    } else {
      q_sum += g.q;
    }
  }
  double inside = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < axes.p_axis.size(); ++i)
    for (Eigen::Index j = 0; j < axes.phi_axis.size(); ++j) {
      const double v = q_sum(i, j);
      total += v;
      const PhasePoint pt{axes.p_axis[i], axes.phi_axis[j]};
      for (const auto& boundary : boundaries)
        if (point_in_polygon(boundary.section_points, pt)) {
          inside += v;
          break;
        }
    }
  const double mass_fraction = total > 0.0 ? inside / total : 0.0;

  stage = "dataset write";
  b.add_csv("husimi_sum.csv", grid_csv(axes, q_sum));
  Json polys = Json::array();
  for (std::size_t i = 0; i < boundaries.size(); ++i)
    polys.push_back(Json{{"center", Json::array({centers[i].p, centers[i].phi})},
                         {"polygon", polygon_json(resample(boundaries[i].section_points, 160))}});
  b.add_json("islands.json", Json{{"islands", polys},
                                  {"orbits", Json::array({orbit_json("chain_a", mf, chain_a),
                                                          orbit_json("chain_b", mf, chain_b)})}});
  Json states = Json::array();
  for (int s : sextet)
    states.push_back(Json{{"state_index", s},
                          {"quasienergy", fs.quasienergies[s]},
                          {"parity", fs.parity[static_cast<std::size_t>(s)] == Parity::even
                                         ? "even"
                                         : "odd"},
                          {"score", score[s]}});
  b.add_json("states.json", Json{{"sextet", states}});
  b.extra["mass_fraction"] = mass_fraction;
}

void run_custom(const ExperimentSpec& spec, const Plan& plan, BundleWriter& b,
                std::string& stage) {
  if (plan.params.mu == 0.0) {
    stage = "static spectrum";
    const Eigen::VectorXd evals = static_spectrum(plan.params);
    CsvWriter csv({"index", "energy"});
    for (Eigen::Index i = 0; i < evals.size(); ++i)
      csv.append_row({static_cast<double>(i), evals[i]});
    b.add_csv("static_spectrum.csv", csv);
    b.extra["kind"] = "static_spectrum";
  } else {
    stage = "evolution";
    write_return_series(spec, plan, b);
    b.extra["kind"] = "return_probability";
  }
}

} // namespace

Preset preset_from_name(const std::string& name) {
  for (const auto& [p, n] : kPresetNames)
    if (name == n) return p;
  throw StructuralError("unknown preset '" + name + "'");
}

std::string preset_name(Preset preset) {
  for (const auto& [p, n] : kPresetNames)
    if (p == preset) return n;
  throw StructuralError("unnamed preset value");
}

ExperimentSummary run_experiment(const ExperimentSpec& spec) {
  const auto t_begin = std::chrono::steady_clock::now();
  const Plan plan = resolve_plan(spec);
  if (spec.out_dir.empty()) throw StructuralError("run_experiment: empty output directory");
  BundleWriter bundle(spec.out_dir);

  std::string stage = "setup";
  try {
    switch (spec.preset) {
      case Preset::fig1:
      case Preset::fig9a:
      case Preset::fig9b:
        run_return_preset(spec, plan, bundle, stage);
        break;
      case Preset::fig2:
        run_fig2(spec, plan, bundle, stage);
        break;
      case Preset::fig3:
        run_fig3(spec, plan, bundle, stage);
        break;
      case Preset::fig5:
        run_fig5(spec, plan, bundle, stage);
        break;
      case Preset::fig6:
        run_fig6(spec, plan, bundle, stage);
        break;
      case Preset::fig7:
        run_fig7(spec, plan, bundle, stage);
        break;
      case Preset::fig8:
        run_fig8(spec, plan, bundle, stage);
        break;
      case Preset::custom:
        run_custom(spec, plan, bundle, stage);
        break;
    }
  } catch (const StructuralError& e) {
    throw StructuralError(preset_name(spec.preset) + " stage '" + stage + "': " + e.what());
  } catch (const NotInvariantCurve& e) {
    throw NotInvariantCurve(preset_name(spec.preset) + " stage '" + stage + "': " + e.what());
  } catch (const PhysicsRejection& e) {
    throw PhysicsRejection(preset_name(spec.preset) + " stage '" + stage + "': " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(preset_name(spec.preset) + " stage '" + stage + "': " + e.what());
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();

  Json summary;
  summary["preset"] = preset_name(spec.preset);
  summary["version"] = version_string;
  summary["config_hash"] = config_fingerprint(spec, plan);
  summary["params"] = params_json(plan.params);
  summary["derived"] = Json{{"alpha", plan.params.alpha()},
                            {"hbar_eff", plan.params.hbar_eff()},
                            {"period", plan.params.period()},
                            {"dtau", plan.params.dtau()}};
  summary["plan"] = Json{{"p0", plan.p0},
                         {"phi0", plan.phi0},
                         {"horizon_periods", plan.horizon_periods},
                         {"samples_per_period", plan.samples_per_period},
                         {"grid_resolution", plan.grid_resolution},
                         {"section_periods", plan.section_periods},
                         {"n_list", plan.n_list}};
  summary["overrides"] = spec.overrides;
  summary["tolerance"] = spec.tolerance;
  summary["wall_time_s"] = wall;
  summary["files"] = bundle.files;
  for (const auto& [key, value] : bundle.extra.items()) summary[key] = value;
  write_json(spec.out_dir / "summary.json", summary);

  ExperimentSummary out;
  out.preset = spec.preset;
  out.bundle_dir = spec.out_dir;
  out.files = bundle.files;
  out.wall_time_s = wall;
  return out;
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw StructuralError("CSV column '" + name + "' missing");
  }
};

CsvTable load_csv(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  CsvTable table;
  std::size_t start = 0;
  bool first = true;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t cs = 0;
    while (cs <= line.size()) {
      std::size_t ce = line.find(',', cs);
      if (ce == std::string::npos) ce = line.size();
      cells.push_back(line.substr(cs, ce - cs));
      cs = ce + 1;
    }
    if (first) {
      table.header = cells;
      first = false;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells)
      row.push_back(parse_double_strict(path.filename().string(), cell));
    if (row.size() != table.header.size())
      throw StructuralError(path.string() + ": ragged row with " + std::to_string(row.size()) +
                            " cells");
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw StructuralError(path.string() + ": empty CSV");
  return table;
}

void add_criterion(ValidationReport& rep, const std::string& name, bool ok,
                   const std::string& detail) {
  rep.criteria.push_back({name, ok, detail});
}

std::string fmt(double v) { return CsvWriter::format_double(v); }

// Value at t = k periods: the sample nearest to it in the periods column.
double series_value(const CsvTable& t, double periods) {
  const int cp = t.col("periods");
  const int cv = t.col("return_probability");
  double best = std::numeric_limits<double>::infinity();
  double value = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : t.rows) {
    const double d = std::abs(row[static_cast<std::size_t>(cp)] - periods);
    if (d < best) {
      best = d;
      value = row[static_cast<std::size_t>(cv)];
    }
  }
  if (best > 0.5) throw StructuralError("series has no sample near t = " + fmt(periods) + "T");
  return value;
}

void check_series_sane(ValidationReport& rep, const CsvTable& t) {
  const int cv = t.col("return_probability");
  bool bounded = !t.rows.empty();
  for (const auto& row : t.rows) {
    const double v = row[static_cast<std::size_t>(cv)];
    if (!std::isfinite(v) || v < -1e-9 || v > 1.0 + 1e-9) bounded = false;
  }
  const double at0 = t.rows.empty() ? 0.0 : series_value(t, 0.0);
  add_criterion(rep, "series_sane", bounded && std::abs(at0 - 1.0) < 1e-6,
                "bounded in [0,1], P(0) = " + fmt(at0));
}

void validate_fig1(const std::filesystem::path& dir, ValidationReport& rep) {
  const CsvTable t = load_csv(dir / "return_probability.csv");
  check_series_sane(rep, t);
  double min_peak = std::numeric_limits<double>::infinity();
  std::string peaks;
  for (int k = 1; k <= 5; ++k) {
    const double v = series_value(t, 3.0 * k);
    min_peak = std::min(min_peak, v);
    peaks += (k > 1 ? " " : "") + fmt(v);
  }
  add_criterion(rep, "clock_peaks", min_peak >= 0.7, "P(3kT) k=1..5: " + peaks);
  double max_trough = 0.0;
  for (int k = 1; k <= 15; ++k) {
    if (k % 3 == 0) continue;
    max_trough = std::max(max_trough, series_value(t, k));
  }
  add_criterion(rep, "clock_troughs", max_trough <= 0.3,
                "max off-beat P(kT) = " + fmt(max_trough));
}

void validate_fig9a(const std::filesystem::path& dir, ValidationReport& rep) {
  const CsvTable t = load_csv(dir / "return_probability.csv");
  check_series_sane(rep, t);
  double max_side = 0.0;
  for (int k = 1; k <= 5; ++k) max_side = std::max(max_side, series_value(t, 3.0 * k));
  add_criterion(rep, "side_peaks_visible", max_side >= 0.1,
                "max P(3kT) k=1..5 = " + fmt(max_side));
}

void validate_fig9b(const std::filesystem::path& dir, ValidationReport& rep) {
  const CsvTable t = load_csv(dir / "return_probability.csv");
  check_series_sane(rep, t);
  const double p18 = series_value(t, 18.0);
  double max_side = 0.0;
  for (int k = 1; k <= 5; ++k) max_side = std::max(max_side, series_value(t, 3.0 * k));
  add_criterion(rep, "clock_18T", p18 >= 1.5 * max_side,
                "P(18T) = " + fmt(p18) + " vs 1.5 * max P(3kT) = " + fmt(1.5 * max_side));
}

const Json& orbit_by_label(const Json& orbits, const std::string& label) {
  for (const auto& o : orbits.at("orbits"))
    if (o.at("label").get<std::string>() == label) return o;
  throw StructuralError("orbits.json is missing the '" + label + "' orbit");
}

void validate_fig2(const std::filesystem::path& dir, ValidationReport& rep) {
  const CsvTable t = load_csv(dir / "section.csv");
  bool sane = t.rows.size() > 1000;
  const int cp = t.col("p");
  for (const auto& row : t.rows) {
    const double p = row[static_cast<std::size_t>(cp)];
    if (!std::isfinite(p) || std::abs(p) > 1.0) sane = false;
  }
  add_criterion(rep, "section_sane", sane,
                std::to_string(t.rows.size()) + " section points, |p| <= 1");

  const Json orbits = read_json(dir / "orbits.json");
  const Json& main = orbit_by_label(orbits, "main");
  add_criterion(rep, "main_island",
                main.at("k").get<int>() == 1 && main.at("elliptic").get<bool>(),
                "period-1 orbit at p = " + fmt(main.at("p").get<double>()) +
                    ", phi = " + fmt(main.at("phi").get<double>()));
  const Json& a = orbit_by_label(orbits, "chain_a");
  const Json& b = orbit_by_label(orbits, "chain_b");
  const bool chains_elliptic = a.at("k").get<int>() == 3 && b.at("k").get<int>() == 3 &&
                               a.at("elliptic").get<bool>() && b.at("elliptic").get<bool>();
  add_criterion(rep, "two_period3_chains", chains_elliptic,
                "chain traces " + fmt(a.at("trace").get<double>()) + ", " +
                    fmt(b.at("trace").get<double>()));
  const double pa = a.at("p").get<double>();
  add_criterion(rep, "chain_near_seed", std::abs(pa - (-0.497)) <= 0.02,
                "refined p = " + fmt(pa) + " vs -0.497");
  std::vector<std::pair<double, double>> pts;
  for (const auto& o : {a, b})
    for (const auto& q : o.at("points"))
      pts.emplace_back(q.at(0).get<double>(), q.at(1).get<double>());
  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      min_dist = std::min(min_dist, std::hypot(pts[i].first - pts[j].first,
                                               wrap_angle(pts[i].second - pts[j].second)));
  add_criterion(rep, "six_islands", pts.size() == 6 && min_dist > 1e-3,
                "6 centers, min separation " + fmt(min_dist));
}

void validate_fig3(const std::filesystem::path& dir, const Json& summary,
                   ValidationReport& rep) {
  const CsvTable t = load_csv(dir / "requantization.csv");
  const double hbar = summary.at("derived").at("hbar_eff").get<double>();
  const int cn = t.col("n");
  const int ca = t.col("action");
  const int cr = t.col("residual");

  std::vector<std::pair<int, double>> fitted;
  for (const auto& row : t.rows)
    fitted.emplace_back(static_cast<int>(row[static_cast<std::size_t>(cn)]),
                        row[static_cast<std::size_t>(ca)]);
  std::sort(fitted.begin(), fitted.end());
  add_criterion(rep, "ground_tube", !fitted.empty() && fitted.front().first == 0,
                std::to_string(fitted.size()) + " tubes fitted");

  bool spacing_ok = fitted.size() >= 2;
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < fitted.size(); ++i) {
    const double dn = fitted[i + 1].first - fitted[i].first;
    const double ratio = (fitted[i + 1].second - fitted[i].second) / (dn * 2.0 * kPi * hbar);
    worst = std::max(worst, std::abs(ratio - 1.0));
    if (std::abs(ratio - 1.0) > 0.01) spacing_ok = false;
  }
  add_criterion(rep, "action_spacing", spacing_ok,
                "worst |spacing/(2 pi hbar_eff dn) - 1| = " + fmt(worst));

  bool residuals_finite = !t.rows.empty();
  for (const auto& row : t.rows)
    if (!std::isfinite(row[static_cast<std::size_t>(cr)])) residuals_finite = false;
  add_criterion(rep, "residuals_finite", residuals_finite, "all sub-zone residuals finite");

  const Json tubes = read_json(dir / "tubes.json");
  const auto polygon = polygon_from_json(tubes.at("island_boundary"));
  bool ground_inside = false;
  double gp = 0.0, gphi = 0.0;
  int lowest = std::numeric_limits<int>::max();
  for (const auto& m : tubes.at("matches")) {
    const int n = m.at("n").get<int>();
    if (n < lowest) {
      lowest = n;
      gp = m.at("argmax").at("p").get<double>();
      gphi = m.at("argmax").at("phi").get<double>();
      ground_inside = point_in_polygon(polygon, {gp, gphi});
    }
  }
  add_criterion(rep, "ground_localized", ground_inside,
                "n=" + std::to_string(lowest) + " argmax at (" + fmt(gp) + ", " + fmt(gphi) +
                    ")");
}

void validate_fig5(const std::filesystem::path& dir, ValidationReport& rep) {
  const CsvTable t = load_csv(dir / "tube_projection.csv");
  const int ct = t.col("tube");
  const int cp = t.col("p");
  bool two_tubes = false, sane = !t.rows.empty();
  bool saw0 = false, saw1 = false;
  for (const auto& row : t.rows) {
    const int label = static_cast<int>(row[static_cast<std::size_t>(ct)]);
    saw0 = saw0 || label == 0;
    saw1 = saw1 || label == 1;
    const double p = row[static_cast<std::size_t>(cp)];
    if (!std::isfinite(p) || std::abs(p) > 1.0) sane = false;
  }
  two_tubes = saw0 && saw1;
  add_criterion(rep, "projection_complete", two_tubes && sane,
                std::to_string(t.rows.size()) + " samples over " +
                    std::string(two_tubes ? "both tubes" : "missing tubes"));
}

void validate_fig6(const std::filesystem::path& dir, ValidationReport& rep) {
  const CsvTable t = load_csv(dir / "husimi_sum.csv");
  const Json islands = read_json(dir / "islands.json");
  std::vector<std::vector<PhasePoint>> polygons;
  for (const auto& isl : islands.at("islands"))
    polygons.push_back(polygon_from_json(isl.at("polygon")));
  add_criterion(rep, "six_island_contours", polygons.size() == 6,
                std::to_string(polygons.size()) + " contours");

  const int cp = t.col("p");
  const int cf = t.col("phi");
  const int cq = t.col("q");
  double inside = 0.0, total = 0.0;
  for (const auto& row : t.rows) {
    const double v = row[static_cast<std::size_t>(cq)];
    total += v;
    const PhasePoint pt{row[static_cast<std::size_t>(cp)], row[static_cast<std::size_t>(cf)]};
    for (const auto& poly : polygons)
      if (point_in_polygon(poly, pt)) {
        inside += v;
        break;
      }
  }
  const double fraction = total > 0.0 ? inside / total : 0.0;
  add_criterion(rep, "chain_occupation", fraction >= 0.8,
                "mass fraction inside islands = " + fmt(fraction));

  const Json states = read_json(dir / "states.json");
  std::vector<int> indices;
  for (const auto& s : states.at("sextet")) indices.push_back(s.at("state_index").get<int>());
  std::sort(indices.begin(), indices.end());
  const bool distinct =
      indices.size() == 6 && std::adjacent_find(indices.begin(), indices.end()) == indices.end();
  add_criterion(rep, "sextet_distinct", distinct,
                std::to_string(indices.size()) + " states selected");
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cab = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cab += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cab / std::sqrt(va * vb);
}

void validate_fig7(const std::filesystem::path& dir, const Json& summary,
                   ValidationReport& rep) {
  const CsvTable ret = load_csv(dir / "return_probability.csv");
  check_series_sane(rep, ret);

  const CsvTable occ = load_csv(dir / "occupation.csv");
  const int spp = summary.at("plan").at("samples_per_period").get<int>();
  const int horizon = summary.at("plan").at("horizon_periods").get<int>();
  auto strobe_row = [&](int period) -> std::vector<double> {
    const std::size_t r = static_cast<std::size_t>(period) * static_cast<std::size_t>(spp);
    if (r >= occ.rows.size()) throw StructuralError("occupation.csv is missing period rows");
    return std::vector<double>(occ.rows[r].begin() + 1, occ.rows[r].end());
  };
  double corr3 = 0.0, corr1 = 0.0;
  int count = 0;
  for (int k = 0; k + 3 <= horizon; ++k) {
    const auto base = strobe_row(k);
    corr3 += pearson(base, strobe_row(k + 3));
    corr1 += pearson(base, strobe_row(k + 1));
    ++count;
  }
  corr3 /= std::max(count, 1);
  corr1 /= std::max(count, 1);
  add_criterion(rep, "occupation_recurrence", corr3 > corr1,
                "mean corr(t, t+3T) = " + fmt(corr3) + " vs corr(t, t+T) = " + fmt(corr1));
}

void validate_fig8(const std::filesystem::path& dir, ValidationReport& rep) {
  const CsvTable t = load_csv(dir / "section.csv");
  add_criterion(rep, "section_sane", !t.rows.empty(),
                std::to_string(t.rows.size()) + " section points");
  const Json orbits = read_json(dir / "orbits.json");
  const Json& third = orbit_by_label(orbits, "third_order");
  const double p = third.at("p").get<double>();
  const double phi = third.at("phi").get<double>();
  add_criterion(rep, "third_order_orbit",
                third.at("k").get<int>() == 18 && third.at("elliptic").get<bool>() &&
                    std::abs(p - (-0.4278)) <= 0.05 && std::abs(phi) <= 0.05,
                "refined point (" + fmt(p) + ", " + fmt(phi) + ")");
  add_criterion(rep, "chain_period", third.at("minimal_period").get<int>() == 18,
                "minimal return period " + std::to_string(third.at("minimal_period").get<int>()));
}

void validate_custom(const std::filesystem::path& dir, const Json& summary,
                     ValidationReport& rep) {
  const std::string kind = summary.value("kind", "");
  if (kind == "static_spectrum") {
    const CsvTable t = load_csv(dir / "static_spectrum.csv");
    const int dim = summary.at("params").at("n_particles").get<int>() + 1;
    const int ce = t.col("energy");
    bool sorted = static_cast<int>(t.rows.size()) == dim;
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& row : t.rows) {
      const double e = row[static_cast<std::size_t>(ce)];
      if (!std::isfinite(e) || e < prev) sorted = false;
      prev = e;
    }
    add_criterion(rep, "spectrum_sorted", sorted,
                  std::to_string(t.rows.size()) + " levels, ascending");
  } else if (kind == "return_probability") {
    const CsvTable t = load_csv(dir / "return_probability.csv");
    check_series_sane(rep, t);
  } else {
    throw StructuralError("custom bundle with unknown kind '" + kind + "'");
  }
}

} // namespace

ValidationReport validate_bundle(const std::filesystem::path& bundle_dir) {
  const std::filesystem::path summary_path = bundle_dir / "summary.json";
  if (!std::filesystem::exists(summary_path))
    throw StructuralError("bundle " + bundle_dir.string() + " is missing summary.json");
  const Json summary = read_json(summary_path);
  for (const char* field : {"preset", "files", "params", "config_hash", "version"})
    if (!summary.contains(field))
      throw StructuralError("summary.json is missing the '" + std::string(field) + "' field");
  for (const auto& f : summary.at("files")) {
    const std::filesystem::path p = bundle_dir / f.get<std::string>();
    if (!std::filesystem::exists(p) || std::filesystem::file_size(p) == 0)
      throw StructuralError("bundle file " + p.string() + " is missing or empty");
  }

  const Preset preset = preset_from_name(summary.at("preset").get<std::string>());
  ValidationReport rep;
  switch (preset) {
    case Preset::fig1:
      validate_fig1(bundle_dir, rep);
      break;
    case Preset::fig2:
      validate_fig2(bundle_dir, rep);
      break;
    case Preset::fig3:
      validate_fig3(bundle_dir, summary, rep);
      break;
    case Preset::fig5:
      validate_fig5(bundle_dir, rep);
      break;
    case Preset::fig6:
      validate_fig6(bundle_dir, rep);
      break;
    case Preset::fig7:
      validate_fig7(bundle_dir, summary, rep);
      break;
    case Preset::fig8:
      validate_fig8(bundle_dir, rep);
      break;
    case Preset::fig9a:
      validate_fig9a(bundle_dir, rep);
      break;
    case Preset::fig9b:
      validate_fig9b(bundle_dir, rep);
      break;
    case Preset::custom:
      validate_custom(bundle_dir, summary, rep);
      break;
  }

  rep.passed = !rep.criteria.empty();
  int passed_count = 0;
  for (const auto& c : rep.criteria) {
    rep.passed = rep.passed && c.passed;
    passed_count += c.passed ? 1 : 0;
  }
  rep.text = preset_name(preset) + ": " + std::to_string(passed_count) + "/" +
             std::to_string(rep.criteria.size()) + " criteria passed\n";
  for (const auto& c : rep.criteria)
    rep.text += std::string(c.passed ? "  PASS " : "  FAIL ") + c.name + ": " + c.detail + "\n";
  return rep;
}

FloquetSolution floquet_solve_cached(const DimerParams& params, const EvolveOptions& opt,
                                     const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return floquet_solve(params, opt);
  params.validate();
  const int dim = params.dim();
  const std::size_t nd = static_cast<std::size_t>(dim);
  const std::string key =
      fnv1a_hex(params_to_config(params) + "tol=" + CsvWriter::format_double(opt.tol) +
                ";engine=" + std::to_string(static_cast<int>(opt.engine)));
  const std::filesystem::path file = cache_dir / ("floquet_" + key + ".blob");
  const std::size_t expect = 7 + 2 * nd + 2 * nd * nd;

  std::vector<double> data;
  if (read_doubles(file, data) && data.size() == expect && data[0] == params.n &&
      data[1] == params.omega_drive && data[2] == opt.tol && data[5] == dim) {
    FloquetSolution fs;
    fs.omega = params.omega_drive;
    fs.period = data[6];
    fs.max_residual = data[3];
    fs.unitarity_defect = data[4];
    fs.quasienergies = Eigen::Map<const Eigen::VectorXd>(data.data() + 7, dim);
    fs.parity.resize(nd);
    for (std::size_t i = 0; i < nd; ++i)
      fs.parity[i] = data[7 + nd + i] > 0.5 ? Parity::odd : Parity::even;
    fs.states.resize(dim, dim);
    const double* re = data.data() + 7 + 2 * nd;
    const double* im = re + nd * nd;
    fs.states.real() = Eigen::Map<const Eigen::MatrixXd>(re, dim, dim);
    fs.states.imag() = Eigen::Map<const Eigen::MatrixXd>(im, dim, dim);
    return fs;
  }

  FloquetSolution fs = floquet_solve(params, opt);
  data.assign(expect, 0.0);
  data[0] = params.n;
  data[1] = params.omega_drive;
  data[2] = opt.tol;
  data[3] = fs.max_residual;
  data[4] = fs.unitarity_defect;
  data[5] = dim;
  data[6] = fs.period;
  Eigen::Map<Eigen::VectorXd>(data.data() + 7, dim) = fs.quasienergies;
  for (std::size_t i = 0; i < nd; ++i)
    data[7 + nd + i] = fs.parity[i] == Parity::odd ? 1.0 : 0.0;
  double* re = data.data() + 7 + 2 * nd;
  double* im = re + nd * nd;
  Eigen::Map<Eigen::MatrixXd>(re, dim, dim) = fs.states.real();
  Eigen::Map<Eigen::MatrixXd>(im, dim, dim) = fs.states.imag();
  std::filesystem::create_directories(cache_dir);
  write_doubles(file, data);
  return fs;
}

} // namespace dimerlab
