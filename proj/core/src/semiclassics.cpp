#include "dimerlab/semiclassics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <string_view>
#include <utility>

#include "dimerlab/coherent.hpp"
#include "dimerlab/ode.hpp"
#include "dimerlab/state.hpp"

namespace dimerlab {

namespace {

constexpr double kPi = std::numbers::pi;

double cross2(const PhasePoint& o, const PhasePoint& a, const PhasePoint& b) {
  return (a.phi - o.phi) * (b.p - o.p) - (a.p - o.p) * (b.phi - o.phi);
}

// Proper (interior) crossing of segments ab and cd; touching endpoints and
// collinear overlap do not count.
bool segments_cross(const PhasePoint& a, const PhasePoint& b, const PhasePoint& c,
                    const PhasePoint& d) {
  const double d1 = cross2(a, b, c);
  const double d2 = cross2(a, b, d);
  const double d3 = cross2(c, d, a);
  const double d4 = cross2(c, d, b);
  return d1 * d2 < 0.0 && d3 * d4 < 0.0;
}

} // namespace

double polygon_action(const std::vector<PhasePoint>& polyline) {
  const std::size_t m = polyline.size();
  if (m < 3) throw NotInvariantCurve("polygon_action: fewer than 3 points");

  double p_lo = polyline[0].p, p_hi = p_lo, f_lo = polyline[0].phi, f_hi = f_lo;
  for (const auto& q : polyline) {
    p_lo = std::min(p_lo, q.p);
    p_hi = std::max(p_hi, q.p);
    f_lo = std::min(f_lo, q.phi);
    f_hi = std::max(f_hi, q.phi);
  }
  if (std::hypot(p_hi - p_lo, f_hi - f_lo) < 1e-10)
    throw NotInvariantCurve("polygon_action: degenerate polyline, bounding box collapsed");

  for (std::size_t i = 0; i < m; ++i) {
    const PhasePoint& a = polyline[i];
    const PhasePoint& b = polyline[(i + 1) % m];
    for (std::size_t j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue; // closing edge is adjacent to edge 0
      if (segments_cross(a, b, polyline[j], polyline[(j + 1) % m]))
        throw NotInvariantCurve("polygon_action: self-intersecting polyline (edges " +
                                std::to_string(i) + " and " + std::to_string(j) + ")");
    }
  }
  return std::abs(polyline_loop_integral(polyline));
}

double contour_action(const MeanFieldParams& mf, InvariantCurve& curve,
                      const TraceOptions& opt) {
  TraceOptions topt = opt;
  topt.n_returns = std::max(opt.n_returns, 64);

  InvariantCurve best = trace_invariant_curve(mf, curve.seed, curve.period_multiplicity,
                                              topt, &curve.center);
  double action = polygon_action(best.section_points);
  for (int round = 0; round < 6; ++round) {
    topt.n_returns *= 2;
    InvariantCurve finer = trace_invariant_curve(mf, curve.seed, curve.period_multiplicity,
                                                 topt, &curve.center);
    const double refined = polygon_action(finer.section_points);
    const double change = std::abs(refined - action) / std::max(std::abs(refined), 1e-300);
    best = std::move(finer);
    action = refined;
    if (change < 1e-5) {
      curve = std::move(best);
      curve.enclosed_action = action;
      return action;
    }
  }
  throw NumericalError("contour_action: action did not settle under point doubling");
}

namespace {

struct RayProbe {
  bool valid = false;
  double s = 0.0; // displacement actually used (retries may nudge it)
  double action = 0.0;
  InvariantCurve curve;
  std::string reason;
};

// Traces the curve seeded at center + s * u.  Failure triggers a short retry
// ladder (more returns, then nudged displacements); a pole abort is final.
RayProbe probe_ray(const MeanFieldParams& mf, const PhasePoint& center, const PhasePoint& u,
                   double s, int k, const TraceOptions& base) {
  struct Attempt {
    double scale;
    int returns_factor;
  };
  // Near low-order inner resonances the curve winds slowly and needs far more
  // returns before its angular coverage closes: escalate the return count.
  // Radial scatter signals chaos, which more returns cannot cure: nudge the
  // displacement instead.
  const Attempt gap_ladder[3] = {{1.0, 4}, {1.0, 16}, {1.005, 16}};
  const Attempt scatter_ladder[3] = {{1.002, 1}, {0.998, 1}, {1.005, 2}};

  RayProbe probe;
  std::size_t step = 0;
  const Attempt* ladder = gap_ladder;
  Attempt at{1.0, 1};
  while (true) {
    const double sa = s * at.scale;
    const PhasePoint seed{center.p + sa * u.p, center.phi + sa * u.phi};
    TraceOptions topt = base;
    topt.n_returns *= at.returns_factor;
    try {
      InvariantCurve c = trace_invariant_curve(mf, seed, k, topt, &center);
      probe.valid = true;
      probe.s = sa;
      probe.action = c.enclosed_action;
      probe.curve = std::move(c);
      return probe;
    } catch (const PoleProximity& e) {
      probe.reason = e.what();
      return probe;
    } catch (const NotInvariantCurve& e) {
      if (probe.reason.empty())
        ladder = std::string_view(e.what()).find("angular coverage") != std::string_view::npos
                     ? gap_ladder
                     : scatter_ladder;
      probe.reason = e.what();
    }
    if (step >= 3) return probe;
    at = ladder[step++];
  }
}

} // namespace

std::vector<TubeSearchResult> quantize_island(const MeanFieldParams& mf, PhasePoint center,
                                              int k, const DimerParams& params,
                                              const std::vector<int>& n_list,
                                              const QuantizeOptions& opt) {
  mf.validate();
  params.validate();
  if (k < 1) throw StructuralError("quantize_island: k must be >= 1");
  if (n_list.empty()) return {};
  for (int n : n_list)
    if (n < 0) throw StructuralError("quantize_island: negative quantum number");
  const double ulen = std::hypot(opt.ray.p, opt.ray.phi);
  if (!(ulen > 0.0)) throw StructuralError("quantize_island: zero ray direction");
  const PhasePoint u{opt.ray.p / ulen, opt.ray.phi / ulen};

  OrbitSearchOptions oopt;
  oopt.flow = opt.trace.flow;
  const PeriodicOrbit orbit = find_periodic_orbit(mf, center, k, oopt);
  if (!orbit.elliptic)
    throw PhysicsRejection("quantize_island: center is not elliptic (tr = " +
                           std::to_string(orbit.trace) + ")");
  const PhasePoint c = orbit.point;
  const double hbar = params.hbar_eff();

  // Process targets in ascending order so brackets carry over; report in
  // input order.
  std::vector<std::size_t> order(n_list.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&n_list](std::size_t a, std::size_t b) { return n_list[a] < n_list[b]; });

  std::map<double, RayProbe> cache;
  auto probe = [&](double s) -> const RayProbe& {
    auto it = cache.find(s);
    if (it == cache.end())
      it = cache.emplace(s, probe_ray(mf, c, u, s, k, opt.trace)).first;
    return it->second;
  };

  double s_bad = std::numeric_limits<double>::infinity(); // smallest known invalid s
  double capacity = -1.0; // largest invariant action seen once the boundary is squeezed
  std::string capacity_note;
  std::string last_reason;

  std::vector<TubeSearchResult> results(n_list.size());
  for (std::size_t oi : order) {
    const int n = n_list[oi];
    const double target = 2.0 * kPi * hbar * (n + 0.5);
    TubeSearchResult& res = results[oi];
    res.n = n;

    if (capacity >= 0.0 && target > capacity * (1.0 + opt.rel_tol)) {
      res.note = "island capacity " + std::to_string(capacity) + " below target " +
                 std::to_string(target) + (capacity_note.empty() ? "" : "; " + capacity_note);
      continue;
    }

    // Bracket from the cache: largest valid action below target, smallest at
    // or above it.  Displacement and action are assumed to grow together.
    const RayProbe* below = nullptr;
    const RayProbe* above = nullptr;
    for (const auto& [s, pr] : cache) {
      if (!pr.valid) continue;
      if (pr.action < target) {
        if (!below || pr.action > below->action) below = &pr;
      } else if (!above || pr.action < above->action) {
        above = &pr;
      }
    }

    if (!below) {
      double s = std::min(opt.s_init, s_bad * 0.5);
      for (int tries = 0; tries < 48 && s > 1e-9; ++tries, s *= 0.5) {
        const RayProbe& pr = probe(s);
        if (!pr.valid) {
          last_reason = pr.reason;
          continue;
        }
        if (pr.action < target) {
          below = &pr;
          break;
        }
      }
      if (!below)
        throw PhysicsRejection("quantize_island: no invariant curve with action below " +
                               std::to_string(target) + " near the center" +
                               (last_reason.empty() ? "" : " (" + last_reason + ")"));
    }

    // Grow (or squeeze against the known invalid bound) until the target is
    // bracketed or the island runs out of invariant curves.
    int guard = 0;
    while (!above && capacity < 0.0) {
      if (++guard > 60)
        throw NumericalError("quantize_island: bracketing stalled at s = " +
                             std::to_string(below->s));
      double s_next;
      if (std::isfinite(s_bad)) {
        if (s_bad - below->s <= 5e-3 * s_bad) {
          capacity = below->action;
          capacity_note = last_reason;
          break;
        }
        s_next = 0.5 * (below->s + s_bad);
      } else if (below->s >= opt.s_max) {
        capacity = below->action;
        capacity_note = "search bound s_max = " + std::to_string(opt.s_max) + " reached";
        break;
      } else {
        s_next = std::min(below->s * 1.6, opt.s_max);
      }
      const RayProbe& pr = probe(s_next);
      if (!pr.valid) {
        s_bad = std::min(s_bad, s_next);
        last_reason = pr.reason;
      } else if (pr.action >= target) {
        above = &pr;
      } else {
        below = &pr;
      }
    }
    if (!above) {
      res.note = "island capacity " + std::to_string(capacity) + " below target " +
                 std::to_string(target) + (capacity_note.empty() ? "" : "; " + capacity_note);
      continue;
    }

    // Bisect the displacement until the action matches the target.
    const RayProbe* hit = nullptr;
    for (const RayProbe* end : {below, above})
      if (std::abs(end->action - target) <= opt.rel_tol * target) hit = end;
    double s_lo = below->s, s_hi = above->s;
    for (int iter = 0; !hit && iter < opt.max_bisections; ++iter) {
      if (s_hi - s_lo < 1e-11) break;
      const double mid = 0.5 * (s_lo + s_hi);
      const RayProbe& pr = probe(mid);
      if (!pr.valid) {
        // Interior rejection (resonant or chaotic layer): shrink from above.
        s_hi = mid;
        last_reason = pr.reason;
        continue;
      }
      if (std::abs(pr.action - target) <= opt.rel_tol * target) {
        hit = &pr;
      } else if (pr.action < target) {
        s_lo = mid;
      } else {
        s_hi = mid;
      }
    }
    if (!hit) {
      res.note = "bisection failed to reach action " + std::to_string(target) +
                 " within tolerance" + (last_reason.empty() ? "" : " (" + last_reason + ")");
      continue;
    }

    QuantizedTube tube;
    tube.n = n;
    tube.k = k;
    tube.action = hit->action;
    tube.target_action = target;
    tube.seed_displacement = hit->s;
    tube.curve = hit->curve;
    res.fits = true;
    res.tube = std::move(tube);
  }
  return results;
}

InvariantCurve island_boundary(const MeanFieldParams& mf, PhasePoint center, int k,
                               const QuantizeOptions& opt) {
  mf.validate();
  if (k < 1) throw StructuralError("island_boundary: k must be >= 1");
  const double ulen = std::hypot(opt.ray.p, opt.ray.phi);
  if (!(ulen > 0.0)) throw StructuralError("island_boundary: zero ray direction");
  const PhasePoint u{opt.ray.p / ulen, opt.ray.phi / ulen};

  OrbitSearchOptions oopt;
  oopt.flow = opt.trace.flow;
  const PeriodicOrbit orbit = find_periodic_orbit(mf, center, k, oopt);
  if (!orbit.elliptic)
    throw PhysicsRejection("island_boundary: center is not elliptic (tr = " +
                           std::to_string(orbit.trace) + ")");
  const PhasePoint c = orbit.point;

  RayProbe last;
  std::string reason;
  for (double s = opt.s_init; !last.valid && s > 1e-8; s *= 0.5) {
    RayProbe pr = probe_ray(mf, c, u, s, k, opt.trace);
    if (pr.valid)
      last = std::move(pr);
    else
      reason = pr.reason;
  }
  if (!last.valid)
    throw PhysicsRejection("island_boundary: no invariant curve near the center" +
                           (reason.empty() ? "" : " (" + reason + ")"));

  double s_bad = std::numeric_limits<double>::infinity();
  for (int guard = 0; guard < 60; ++guard) {
    double s_next;
    if (std::isfinite(s_bad)) {
      if (s_bad - last.s <= 5e-3 * s_bad) break;
      s_next = 0.5 * (last.s + s_bad);
    } else if (last.s >= opt.s_max) {
      break;
    } else {
      s_next = std::min(last.s * 1.6, opt.s_max);
    }
    RayProbe pr = probe_ray(mf, c, u, s_next, k, opt.trace);
    if (pr.valid)
      last = std::move(pr);
    else
      s_bad = std::min(s_bad, s_next);
  }
  return std::move(last.curve);
}

ContourActionParts time_contour_action(const MeanFieldParams& mf, const InvariantCurve& curve,
                                       const FlowOptions& opt) {
  const auto& pts = curve.section_points;
  const std::size_t m = pts.size();
  if (m < 8) throw StructuralError("time_contour_action: polyline needs at least 8 points");
  const int k = curve.period_multiplicity;
  const PhasePoint c0 = curve.center;

  // One system carries the trajectory, the center orbit, the action integral
  // of p dphi - H dtau, and the polar angle of the trajectory about the
  // moving center.  Relative coordinates make the angle branch-free even
  // when the orbit winds around the phase cylinder.
  const PhasePoint x0 = pts.front();
  Eigen::VectorXd y(6);
  y << x0.p, x0.phi, c0.p, c0.phi, 0.0, std::atan2(x0.p - c0.p, x0.phi - c0.phi);
  const double theta0 = y[5];

  auto rhs = [&mf](double tau, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    const PhasePoint a{s[0], s[1]};
    const PhasePoint b{s[2], s[3]};
    double dpa, dfa, dpb, dfb;
    meanfield_rhs(mf, a, tau, dpa, dfa);
    meanfield_rhs(mf, b, tau, dpb, dfb);
    ds[0] = dpa;
    ds[1] = dfa;
    ds[2] = dpb;
    ds[3] = dfb;
    ds[4] = s[0] * dfa - meanfield_energy(mf, a, tau);
    const double rp = s[0] - s[2];
    const double rf = s[1] - s[3];
    const double r2 = rp * rp + rf * rf;
    ds[5] = r2 > 1e-300 ? (rf * (dpa - dpb) - rp * (dfa - dfb)) / r2 : 0.0;
  };

  OdeOptions oopt;
  oopt.rtol = opt.rtol;
  oopt.atol = opt.atol;
  integrate_adaptive(rhs, y, 0.0, k * mf.dtau(), oopt);

  if (std::hypot(y[2] - c0.p, wrap_angle(y[3] - c0.phi)) > 1e-6)
    throw NumericalError("time_contour_action: center is not a period-" + std::to_string(k) +
                         " point (return defect " +
                         std::to_string(std::hypot(y[2] - c0.p, wrap_angle(y[3] - c0.phi))) +
                         ")");

  // Back on the section: rebranch the endpoint next to the center and close
  // the contour along the polyline in ascending angular order.
  const PhasePoint yend{y[0], c0.phi + wrap_angle(y[1] - c0.phi)};
  double mean_r = 0.0;
  for (const auto& q : pts) mean_r += std::hypot(q.p - c0.p, q.phi - c0.phi);
  mean_r /= static_cast<double>(m);

  std::size_t iy = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double d = std::hypot(pts[i].p - yend.p, pts[i].phi - yend.phi);
    if (d < dist) {
      dist = d;
      iy = i;
    }
  }
  if (dist > 0.1 * mean_r)
    throw NotInvariantCurve("time_contour_action: trajectory left the curve (distance " +
                            std::to_string(dist) + " vs mean radius " + std::to_string(mean_r) +
                            ")");

  auto angle_of = [&c0](const PhasePoint& q) {
    return std::atan2(q.p - c0.p, q.phi - c0.phi);
  };
  double closing = 0.0;
  double dtheta_close = 0.0;
  PhasePoint cur = yend;
  double cur_angle = angle_of(yend);
  auto step_to = [&](const PhasePoint& nxt) {
    closing += 0.5 * (cur.p + nxt.p) * (nxt.phi - cur.phi);
    const double na = angle_of(nxt);
    dtheta_close += wrap_angle(na - cur_angle);
    cur = nxt;
    cur_angle = na;
  };
  step_to(pts[iy]);
  for (std::size_t s = iy; s != 0;) {
    s = (s + 1) % m;
    step_to(pts[s]);
  }

  // The closed contour turns about the tube core an integer number of times;
  // remove that multiple of the section action.  Clockwise turns count
  // positive, matching the positive clockwise section action.
  const double dtheta = (y[5] - theta0) + dtheta_close;
  const double w_raw = -dtheta / (2.0 * kPi);
  const int w = static_cast<int>(std::llround(w_raw));
  if (std::abs(w_raw - w) > 0.05)
    throw NumericalError("time_contour_action: winding " + std::to_string(w_raw) +
                         " is not close to an integer");

  ContourActionParts out;
  out.flow = y[4];
  out.closing = closing;
  out.winding = w;
  out.curve_action = std::abs(polyline_loop_integral(pts));
  out.pure = out.flow + out.closing - w * out.curve_action;
  return out;
}

double semiclassical_quasienergy(const MeanFieldParams& mf, const DimerParams& params,
                                 QuantizedTube& tube, int photon_index,
                                 const FlowOptions& opt) {
  const ContourActionParts parts = time_contour_action(mf, tube.curve, opt);
  const double span = tube.k * mf.dtau();
  const double wk = 2.0 * kPi * params.hbar_eff() / span;
  const double eps = -parts.pure / span + photon_index * wk;
  tube.eps_semiclassical = eps;
  tube.photon_index = photon_index;
  tube.subzone = wk;
  return eps;
}

double quasienergy_to_meanfield_units(const DimerParams& params, double quasienergy) {
  const double h = params.hbar_eff();
  return h * quasienergy / params.omega - params.alpha() * (1.0 - h);
}

double subzone_width(const DimerParams& params, int k) {
  if (k < 1) throw StructuralError("subzone_width: k must be >= 1");
  return 2.0 * kPi * params.hbar_eff() / (k * params.dtau());
}

std::vector<TubeAssignment> match_states_to_tubes(const DimerParams& params,
                                                  const FloquetSolution& fs,
                                                  std::vector<QuantizedTube>& tubes,
                                                  const MeanFieldParams& mf) {
  if (tubes.empty()) return {};
  const int dim = params.dim();
  if (fs.states.rows() != dim || fs.states.cols() != dim)
    throw StructuralError("match_states_to_tubes: state matrix does not match params");

  // Score every Floquet state against every tube in one overlap product:
  // the score is the mean Husimi value over probe points along the polyline.
  constexpr std::size_t probes_per_tube = 64;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::vector<PhasePoint> probe_points;
  for (const auto& t : tubes) {
    const auto& pts = t.curve.section_points;
    if (pts.size() < 3) throw StructuralError("match_states_to_tubes: tube polyline too small");
    const std::size_t take = std::min(probes_per_tube, pts.size());
    ranges.emplace_back(probe_points.size(), take);
    for (std::size_t i = 0; i < take; ++i)
      probe_points.push_back(pts[i * pts.size() / take]);
  }

  Matrix coh(dim, static_cast<Eigen::Index>(probe_points.size()));
  for (std::size_t i = 0; i < probe_points.size(); ++i)
    coh.col(static_cast<Eigen::Index>(i)) = coherent_state(params, probe_points[i]).amps;
  const Eigen::MatrixXd husimi = (coh.adjoint() * fs.states).cwiseAbs2();

  Eigen::MatrixXd scores(tubes.size(), dim);
  for (std::size_t t = 0; t < tubes.size(); ++t)
    scores.row(static_cast<Eigen::Index>(t)) =
        husimi.middleRows(static_cast<Eigen::Index>(ranges[t].first),
                          static_cast<Eigen::Index>(ranges[t].second))
            .colwise()
            .mean();

  std::vector<TubeAssignment> out(tubes.size());
  std::vector<char> used(static_cast<std::size_t>(dim), 0);
  for (std::size_t t = 0; t < tubes.size(); ++t) {
    int best = -1;
    double b1 = -1.0, b2 = -1.0;
    for (int l = 0; l < dim; ++l) {
      if (used[static_cast<std::size_t>(l)]) continue;
      const double sc = scores(static_cast<Eigen::Index>(t), l);
      if (sc > b1) {
        b2 = b1;
        b1 = sc;
        best = l;
      } else if (sc > b2) {
        b2 = sc;
      }
    }
    if (best < 0) throw StructuralError("match_states_to_tubes: more tubes than states");
    used[static_cast<std::size_t>(best)] = 1;

    if (!(tubes[t].subzone > 0.0) || std::isnan(tubes[t].eps_semiclassical))
      semiclassical_quasienergy(mf, params, tubes[t]);

    TubeAssignment& a = out[t];
    a.tube_index = static_cast<int>(t);
    a.state_index = best;
    a.score = b1;
    a.runner_up = std::max(b2, 0.0);
    a.ambiguous = b2 >= 0.95 * b1;
    a.eps_semiclassical = tubes[t].eps_semiclassical;
    a.eps_exact = quasienergy_to_meanfield_units(params, fs.quasienergies[best]);
    a.residual = circular_distance(a.eps_exact, a.eps_semiclassical, tubes[t].subzone);
  }
  return out;
}

bool point_in_polygon(const std::vector<PhasePoint>& polygon, PhasePoint point) {
  const std::size_t m = polygon.size();
  if (m < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
    const PhasePoint& a = polygon[i];
    const PhasePoint& b = polygon[j];
    if ((a.p > point.p) != (b.p > point.p)) {
      const double x = a.phi + (point.p - a.p) / (b.p - a.p) * (b.phi - a.phi);
      if (point.phi < x) inside = !inside;
    }
  }
  return inside;
}

} // namespace dimerlab
