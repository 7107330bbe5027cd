#include "dimerlab/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dimerlab/ode.hpp"

namespace dimerlab {

namespace {

constexpr double pi = std::numbers::pi;
// Below this distance from |p| = 1 the sqrt in the drift term loses all
// relative accuracy; the rhs refuses to evaluate.
constexpr double pole_eps = 1e-12;

} // namespace

double wrap_angle(double phi) {
  double w = std::remainder(phi, 2.0 * pi);
  if (w <= -pi) w += 2.0 * pi;
  return w;
}

double MeanFieldParams::dtau() const { return 2.0 * pi / freq_ratio; }

void MeanFieldParams::validate() const {
  if (alpha < 0.0 || !std::isfinite(alpha))
    throw StructuralError("MeanFieldParams: alpha must be >= 0");
  if (drive_ratio < 0.0 || !std::isfinite(drive_ratio))
    throw StructuralError("MeanFieldParams: drive_ratio must be >= 0");
  if (!(freq_ratio > 0.0) || !std::isfinite(freq_ratio))
    throw StructuralError("MeanFieldParams: freq_ratio must be positive");
}

MeanFieldParams MeanFieldParams::reduce(const DimerParams& p) {
  p.validate();
  MeanFieldParams mf;
  mf.alpha = p.alpha();
  mf.drive_ratio = p.mu / p.omega;
  mf.freq_ratio = p.omega_drive / p.omega;
  return mf;
}

double meanfield_energy(const MeanFieldParams& mf, const PhasePoint& x, double tau) {
  const double root = std::sqrt(std::max(0.0, 1.0 - x.p * x.p));
  return mf.alpha * x.p * x.p - root * std::cos(x.phi) +
         2.0 * mf.drive_ratio * x.p * std::cos(mf.freq_ratio * tau);
}

void meanfield_rhs(const MeanFieldParams& mf, const PhasePoint& x, double tau,
                   double& dp_dtau, double& dphi_dtau) {
  if (std::abs(x.p) >= 1.0 - pole_eps) throw PoleProximity(x.p, tau);
  const double root = std::sqrt((1.0 - x.p) * (1.0 + x.p));
  dp_dtau = -root * std::sin(x.phi);
  dphi_dtau = 2.0 * mf.alpha * x.p + x.p * std::cos(x.phi) / root +
              2.0 * mf.drive_ratio * std::cos(mf.freq_ratio * tau);
}

PhasePoint flow(const MeanFieldParams& mf, PhasePoint x, double tau0, double tau1,
                const FlowOptions& opt) {
  mf.validate();
  Eigen::Vector2d y(x.p, x.phi);
  const double band = 1.0 - opt.guard_band;
  auto rhs = [&](double tau, const Eigen::Vector2d& v, Eigen::Vector2d& dv) {
    if (std::abs(v[0]) > band) throw PoleProximity(v[0], tau);
    PhasePoint q{v[0], v[1]};
    meanfield_rhs(mf, q, tau, dv[0], dv[1]);
  };
  OdeOptions ode;
  ode.rtol = opt.rtol;
  ode.atol = opt.atol;
  integrate_adaptive(rhs, y, tau0, tau1, ode);
  return {y[0], y[1]};
}

PhasePoint poincare_map(const MeanFieldParams& mf, PhasePoint x, int k, double tau0,
                        const FlowOptions& opt) {
  if (k < 1) throw StructuralError("poincare_map: k must be >= 1");
  return flow(mf, x, tau0, tau0 + k * mf.dtau(), opt);
}

std::vector<SeedTrace> poincare_section(const MeanFieldParams& mf,
                                        const std::vector<PhasePoint>& seeds,
                                        int n_periods, const FlowOptions& opt) {
  if (n_periods < 1) throw StructuralError("poincare_section: n_periods must be >= 1");
  std::vector<SeedTrace> traces(seeds.size());
  const double dt = mf.dtau();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SeedTrace& tr = traces[i];
    tr.seed_id = static_cast<int>(i);
    tr.points.reserve(n_periods);
    PhasePoint x = seeds[i];
    double tau = 0.0;
    try {
      for (int it = 0; it < n_periods; ++it) {
        x = flow(mf, x, tau, tau + dt, opt);
        tau += dt;
        tr.points.push_back({x.p, wrap_angle(x.phi)});
      }
    } catch (const PoleProximity& e) {
      tr.aborted = true;
      tr.abort_tau = e.tau_value;
    }
  }
  return traces;
}

namespace {

// Displacement P^k(x) - x with the phase difference wrapped, so that both
// librating and rotating periodic orbits close.
Eigen::Vector2d return_defect(const MeanFieldParams& mf, const PhasePoint& x, int k,
                              const FlowOptions& opt) {
  const PhasePoint y = poincare_map(mf, x, k, 0.0, opt);
  return {y.p - x.p, wrap_angle(y.phi - x.phi)};
}

} // namespace

PeriodicOrbit find_periodic_orbit(const MeanFieldParams& mf, PhasePoint guess, int k,
                                  const OrbitSearchOptions& opt) {
  if (k < 1) throw StructuralError("find_periodic_orbit: k must be >= 1");
  mf.validate();

  PhasePoint x = guess;
  Eigen::Vector2d g = return_defect(mf, x, k, opt.flow);
  double gnorm = g.norm();

  PeriodicOrbit orbit;
  orbit.k = k;
  const double d = opt.fd_step;

  Eigen::Matrix2d jac = Eigen::Matrix2d::Zero(); // of P^k, not of the defect
  auto fill_jacobian = [&](const PhasePoint& at) {
    const PhasePoint xp{at.p + d, at.phi}, xm{at.p - d, at.phi};
    const PhasePoint yp{at.p, at.phi + d}, ym{at.p, at.phi - d};
    const PhasePoint fp = poincare_map(mf, xp, k, 0.0, opt.flow);
    const PhasePoint fm = poincare_map(mf, xm, k, 0.0, opt.flow);
    const PhasePoint gp = poincare_map(mf, yp, k, 0.0, opt.flow);
    const PhasePoint gm = poincare_map(mf, ym, k, 0.0, opt.flow);
    jac(0, 0) = (fp.p - fm.p) / (2 * d);
    jac(1, 0) = (fp.phi - fm.phi) / (2 * d);
    jac(0, 1) = (gp.p - gm.p) / (2 * d);
    jac(1, 1) = (gp.phi - gm.phi) / (2 * d);
  };

  int iter = 0;
  while (gnorm > opt.tol && iter < opt.max_iterations) {
    ++iter;
    fill_jacobian(x);
    const Eigen::Matrix2d a = jac - Eigen::Matrix2d::Identity();
    if (std::abs(a.determinant()) < 1e-14)
      throw NumericalError("find_periodic_orbit: singular Newton system (parabolic point?)");
    Eigen::Vector2d step = a.partialPivLu().solve(-g);
    // Damped update: shrink until the defect decreases.
    double shrink = 1.0;
    for (int tries = 0; tries < 8; ++tries) {
      const PhasePoint xn{x.p + shrink * step[0], x.phi + shrink * step[1]};
      const Eigen::Vector2d gn = return_defect(mf, xn, k, opt.flow);
      if (gn.norm() < gnorm || tries == 7) {
        x = xn;
        g = gn;
        gnorm = gn.norm();
        break;
      }
      shrink *= 0.5;
    }
  }
  if (gnorm > opt.tol)
    throw NumericalError("find_periodic_orbit: Newton stalled at |P^k(x)-x| = " +
                         std::to_string(gnorm) + ", last iterate p = " +
                         std::to_string(x.p) + ", phi = " + std::to_string(x.phi));

  fill_jacobian(x);
  orbit.point = {x.p, wrap_angle(x.phi)};
  orbit.jacobian = jac;
  orbit.trace = jac.trace();
  orbit.elliptic = std::abs(orbit.trace) < 2.0;
  orbit.stability_angle = orbit.elliptic ? std::acos(std::clamp(orbit.trace / 2.0, -1.0, 1.0)) : 0.0;
  orbit.residue = (2.0 - orbit.trace) / 4.0;
  orbit.residual = gnorm;
  orbit.iterations = iter;
  orbit.converged = true;
  return orbit;
}

double polyline_loop_integral(const std::vector<PhasePoint>& polyline) {
  const std::size_t m = polyline.size();
  if (m < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const PhasePoint& a = polyline[i];
    const PhasePoint& b = polyline[(i + 1) % m];
    acc += 0.5 * (a.p + b.p) * (b.phi - a.phi);
  }
  return acc;
}

InvariantCurve trace_invariant_curve(const MeanFieldParams& mf, PhasePoint seed, int k,
                                     const TraceOptions& opt, const PhasePoint* center_in) {
  if (opt.n_returns < 8)
    throw StructuralError("trace_invariant_curve: need at least 8 returns");
  mf.validate();

  // The enclosed fixed point: either supplied or refined from the seed's
  // neighborhood (the seed itself is a fine Newton guess for thin curves).
  PhasePoint center;
  if (center_in) {
    center = *center_in;
  } else {
    center = find_periodic_orbit(mf, seed, k, {.flow = opt.flow}).point;
  }

  std::vector<PhasePoint> pts;
  pts.reserve(opt.n_returns);
  PhasePoint x = seed;
  double tau = 0.0;
  const double span = k * mf.dtau();
  for (int i = 0; i < opt.n_returns; ++i) {
    // Keep phi on the branch nearest the center so curves straddling the
    // phi = +-pi seam stay connected.
    pts.push_back({x.p, center.phi + wrap_angle(x.phi - center.phi)});
    x = flow(mf, x, tau, tau + span, opt.flow);
    tau += span;
    x.phi = center.phi + wrap_angle(x.phi - center.phi);
  }

  // Order by polar angle about the center.
  std::vector<double> theta(pts.size()), radius(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double dp = pts[i].p - center.p;
    const double df = pts[i].phi - center.phi;
    radius[i] = std::hypot(dp, df);
    theta[i] = std::atan2(dp, df);
    if (radius[i] < 1e-12)
      throw NotInvariantCurve("trace_invariant_curve: degenerate curve (point at center)");
  }
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return theta[a] < theta[b]; });

  double max_gap = 0.0, tv = 0.0;
  double r_min = radius[order[0]], r_max = radius[order[0]];
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t a = order[i];
    const std::size_t b = order[(i + 1) % order.size()];
    double gap = theta[b] - theta[a];
    if (i + 1 == order.size()) gap += 2.0 * pi;
    max_gap = std::max(max_gap, gap);
    tv += std::abs(radius[b] - radius[a]);
    r_min = std::min(r_min, radius[a]);
    r_max = std::max(r_max, radius[a]);
  }
  if (max_gap > opt.max_gap)
    throw NotInvariantCurve("trace_invariant_curve: angular coverage has a gap of " +
                            std::to_string(max_gap) + " rad (near-resonant or escaping seed)");
  const double spread = r_max - r_min;
  if (tv > opt.tv_factor * spread + 1e-9 * r_max)
    throw NotInvariantCurve("trace_invariant_curve: radial scatter " + std::to_string(tv) +
                            " exceeds the smooth-curve bound (chaotic seed?)");

  InvariantCurve curve;
  curve.period_multiplicity = k;
  curve.center = center;
  curve.seed = seed;
  curve.section_points.reserve(pts.size());
  for (std::size_t idx : order) curve.section_points.push_back(pts[idx]);
  curve.enclosed_action = std::abs(polyline_loop_integral(curve.section_points));
  return curve;
}

int tube_period(const MeanFieldParams& mf, const PhasePoint& fixed_point, int k_max,
                double tol, const FlowOptions& opt) {
  if (k_max < 1) throw StructuralError("tube_period: k_max must be >= 1");
  PhasePoint x = fixed_point;
  double tau = 0.0;
  const double dt = mf.dtau();
  for (int k = 1; k <= k_max; ++k) {
    x = flow(mf, x, tau, tau + dt, opt);
    tau += dt;
    const double dp = x.p - fixed_point.p;
    const double df = wrap_angle(x.phi - fixed_point.phi);
    if (std::hypot(dp, df) < tol) return k;
  }
  throw PhysicsRejection("tube_period: no return within k_max = " + std::to_string(k_max) +
                         " periods");
}

} // namespace dimerlab
