#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dimerlab/errors.hpp"
#include "dimerlab/params.hpp"

namespace dimerlab {

// Classical limit of the dimer: a driven pendulum with momentum-shortened
// length in the canonical pair (phi, p),
//   H_mf(p, phi, tau) = alpha p^2 - sqrt(1-p^2) cos(phi)
//                       + 2 (mu/Omega) p cos((omega/Omega) tau),
// with scaled time tau = Omega t.  One driving period is dtau = 2 pi / freq_ratio.
// tau = 0 sits at the drive maximum, matching the quantum model's phase.
struct MeanFieldParams {
  double alpha = 0.92;      // N kappa / Omega, inverse pendulum mass scale
  double drive_ratio = 0.4; // mu / Omega
  double freq_ratio = 1.9;  // omega / Omega

  double dtau() const;      // driving period in scaled time

  void validate() const;
  static MeanFieldParams reduce(const DimerParams& p);
};

// Population imbalance p in [-1, 1] and relative phase phi in (-pi, pi].
struct PhasePoint {
  double p = 0.0;
  double phi = 0.0;
};

// Raised when a trajectory runs into the coordinate poles p = +-1, where the
// (p, phi) chart degenerates.  Orbits are flagged, never continued in
// alternate coordinates.
class PoleProximity : public NumericalError {
public:
  PoleProximity(double p, double tau)
      : NumericalError("trajectory entered the |p| ~ 1 guard band (p = " +
                       std::to_string(p) + ", tau = " + std::to_string(tau) + ")"),
        p_value(p), tau_value(tau) {}
  double p_value;
  double tau_value;
};

double meanfield_energy(const MeanFieldParams& mf, const PhasePoint& x, double tau);

// (dp/dtau, dphi/dtau) at (x, tau).  Throws PoleProximity once |p| reaches
// 1 - 1e-12, where sqrt(1-p^2) underflows the drift term.
void meanfield_rhs(const MeanFieldParams& mf, const PhasePoint& x, double tau,
                   double& dp_dtau, double& dphi_dtau);

struct FlowOptions {
  double rtol = 1e-11;              // section/orbit work needs smooth high-accuracy maps
  double atol = 1e-13;
  double guard_band = 1e-9;         // abort once |p| > 1 - guard_band
};

// Integrates the flow from tau0 to tau1 (either direction).  phi is carried
// unwrapped so that windings are visible to callers.
PhasePoint flow(const MeanFieldParams& mf, PhasePoint x, double tau0, double tau1,
                const FlowOptions& opt = {});

// k-fold stroboscopic map anchored at tau = 0: the state is advanced from
// tau0 by k driving periods.  phi unwrapped.
PhasePoint poincare_map(const MeanFieldParams& mf, PhasePoint x, int k = 1,
                        double tau0 = 0.0, const FlowOptions& opt = {});

struct SeedTrace {
  int seed_id = 0;
  std::vector<PhasePoint> points; // one per period, phi reduced to (-pi, pi]
  bool aborted = false;           // pole guard tripped; trace truncated
  double abort_tau = 0.0;
};

// Stroboscopic section at tau = 0 mod dtau.  A pole abort kills only the
// affected seed; remaining seeds are unaffected.
std::vector<SeedTrace> poincare_section(const MeanFieldParams& mf,
                                        const std::vector<PhasePoint>& seeds,
                                        int n_periods, const FlowOptions& opt = {});

struct PeriodicOrbit {
  PhasePoint point;          // refined fixed point of P^k
  int k = 1;
  Eigen::Matrix2d jacobian;  // d P^k / d(p, phi), finite differences
  double trace = 0.0;
  bool elliptic = false;     // |trace| < 2
  double stability_angle = 0.0; // nu = arccos(trace/2) when elliptic
  double residue = 0.0;      // (2 - trace)/4
  double residual = 0.0;     // |P^k(x) - x| at the returned point
  int iterations = 0;
  bool converged = false;
};

struct OrbitSearchOptions {
  double tol = 1e-10;        // on |P^k(x) - x|
  double fd_step = 1e-6;     // central-difference step for the Jacobian
  int max_iterations = 40;
  FlowOptions flow;
};

// Newton refinement of a periodic point of the k-fold stroboscopic map.
// Throws NumericalError if Newton fails to converge; the exception message
// carries the last iterate.
PeriodicOrbit find_periodic_orbit(const MeanFieldParams& mf, PhasePoint guess, int k,
                                  const OrbitSearchOptions& opt = {});

struct InvariantCurve {
  std::vector<PhasePoint> section_points; // ordered by polar angle about center, closed implicitly
  int period_multiplicity = 1;            // k
  double enclosed_action = 0.0;           // |loop integral of p dphi| > 0
  PhasePoint center;                      // enclosed fixed point of P^k
  PhasePoint seed;                        // launch point used to trace the curve
};

class NotInvariantCurve : public PhysicsRejection {
public:
  explicit NotInvariantCurve(const std::string& what) : PhysicsRejection(what) {}
};

struct TraceOptions {
  int n_returns = 512;
  FlowOptions flow;
  // Rejection thresholds for the angular-ordering test: the total variation
  // of the radius over one angular sweep must stay below tv_factor times the
  // radial spread, and no angular gap may exceed max_gap.
  double tv_factor = 10.0;
  double max_gap = 1.0; // radians
};

// Collects n_returns iterates of P^k, orders them by polar angle about
// center, and closes the polyline.  Scattered clouds (chaotic seeds) and
// ambiguous orderings throw NotInvariantCurve.
InvariantCurve trace_invariant_curve(const MeanFieldParams& mf, PhasePoint seed, int k,
                                     const TraceOptions& opt = {},
                                     const PhasePoint* center = nullptr);

// Minimal k <= k_max with |P^k(x) - x| < tol.  Throws PhysicsRejection when
// the point does not return within k_max periods.
int tube_period(const MeanFieldParams& mf, const PhasePoint& fixed_point, int k_max,
                double tol = 1e-6, const FlowOptions& opt = {});

// Signed loop integral of p dphi over the closed polyline (trapezoidal
// shoelace).  Magnitude is the enclosed area; the sign flips with traversal
// direction (clockwise in the (phi, p) plane gives a positive value).
double polyline_loop_integral(const std::vector<PhasePoint>& polyline);

double wrap_angle(double phi); // reduce to (-pi, pi]

} // namespace dimerlab
