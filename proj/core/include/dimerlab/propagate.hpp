#pragma once
// Unitary time evolution, monodromy, and Floquet analysis for the driven dimer.
//
// Two engines stand behind one interface:
//  - a spectral stepper: fourth-order commutator-free Magnus steps whose
//    exponentials act through Chebyshev expansions of the tridiagonal
//    generator, optionally composed to sixth order by a triple jump;
//  - an adaptive Dormand-Prince integrator on the Schrodinger equation,
//    kept as the independent reference path.
// The spectral stepper calibrates its step count by self-refinement on probe
// vectors. Neither engine ever renormalizes the state: norm drift stays a
// diagnostic of integration quality.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dimerlab/errors.hpp"
#include "dimerlab/params.hpp"
#include "dimerlab/state.hpp"

namespace dimerlab {

enum class Engine {
  automatic,      // adaptive for small dimensions, spectral otherwise
  spectral,       // fourth-order Magnus + Chebyshev
  spectral_high,  // sixth order by triple-jump composition
  adaptive,       // Dormand-Prince reference path
};

struct EvolveOptions {
  double tol = 1e-10;  // global error target per driving period
  Engine engine = Engine::automatic;
  int max_steps_per_period = 1 << 18;
  int dense_limit = 4096;       // refuse whole-propagator builds above this
  bool check_unitarity = true;  // verify the monodromy post-condition
};

// Fold x into the zone [-width/2, width/2).
double fold_to_zone(double x, double width);

// Distance between a and b on a circle of circumference width.
double circular_distance(double a, double b, double width);

// Steps a block of state columns through the Schrodinger equation with the
// Magnus/Chebyshev engine. The step count per period is calibrated once per
// (params, tol, engine) triple and cached process-wide.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const DimerParams& params, const EvolveOptions& opt = {});

  // Advance all columns in place from t0 to t1 (t1 >= t0).
  void advance(Matrix& block, double t0, double t1);
  void advance(Vector& psi, double t0, double t1);

  int steps_per_period() const { return steps_per_period_; }
  bool high_order() const { return high_order_; }

 private:
  void calibrate();
  void advance_data(Complex* data, int cols, double t0, double t1);
  void advance_raw(Complex* data, int cols, double t0, double t1, int steps, bool high_order);
  // phase accumulates the factored-out scalar rotations; null skips tracking
  // (used by all panels except the first, which owns the bookkeeping).
  void magnus_step(Complex* data, int cols, double t, double h, double* phase);
  void exponential(Complex* data, int cols, double coeff_a, double coeff_b, double* phase);
  double estimated_cost(double steps_per_period, bool high_order) const;

  DimerParams params_;
  EvolveOptions opt_;
  Eigen::VectorXd adiag_;  // static diagonal
  Eigen::VectorXd aoff_;   // hopping off-diagonal, length dim-1
  Eigen::VectorXd bdiag_;  // drive diagonal 2j - N
  double half_width_ = 0.0;  // conservative spectral half-width of H(t)
  int steps_per_period_ = 0;
  bool high_order_ = false;
  // Chebyshev workspace, sized on demand.
  Eigen::VectorXd norm_diag_, norm_off_;
  std::vector<double> bessel_;
  Matrix work_[4];
};

// One state from t0 to t1; tol must lie in [1e-13, 1e-6].
ManyBodyState evolve_state(const DimerParams& params, const ManyBodyState& state,
                           double t0, double t1, const EvolveOptions& opt = {});

// Dense propagator over an arbitrary window [t0, t1].
Matrix propagator_window(const DimerParams& params, double t0, double t1,
                         const EvolveOptions& opt = {});

// U(T, 0). Refuses dimensions above opt.dense_limit.
Matrix monodromy(const DimerParams& params, const EvolveOptions& opt = {});

// V = S U(T/2, 0) with S the site swap; V squares to the monodromy.
Matrix half_period_operator(const DimerParams& params, const EvolveOptions& opt = {});

struct HalfPeriodSymmetry {
  Matrix v;
  double witness;  // max-norm of V^2 - U with U integrated independently
};
HalfPeriodSymmetry half_period_symmetry(const DimerParams& params,
                                        const EvolveOptions& opt = {});

enum class Parity : std::uint8_t { even, odd };

struct FloquetSolution {
  double omega = 0.0;   // Brillouin-zone width
  double period = 0.0;
  Eigen::VectorXd quasienergies;  // folded into [-omega/2, omega/2), ascending
  Matrix states;                  // orthonormal columns, one per quasienergy
  std::vector<Parity> parity;
  double max_residual = 0.0;      // worst eigenpair defect, max-norm
  double unitarity_defect = 0.0;  // of the operator that was decomposed
};

// Decomposes a supplied monodromy matrix. Parity labels come from the
// half-period operator, which also splits numerically degenerate clusters.
FloquetSolution floquet_decompose(const Matrix& u, const DimerParams& params,
                                  const EvolveOptions& opt = {});

// Fast path: decomposes V directly, so the full-period matrix is never formed.
FloquetSolution floquet_solve(const DimerParams& params, const EvolveOptions& opt = {});

struct TimeSeries {
  Eigen::VectorXd times;
  Eigen::VectorXd values;
};

TimeSeries return_probability_series(const DimerParams& params, const ManyBodyState& psi0,
                                     int horizon_periods, int samples_per_period,
                                     const EvolveOptions& opt = {});

struct OccupationSeries {
  Eigen::VectorXd times;
  Eigen::MatrixXd occupation;  // column per sample, row per Fock index
};

OccupationSeries fock_occupation_series(const DimerParams& params, const ManyBodyState& psi0,
                                        int horizon_periods, int samples_per_period,
                                        const EvolveOptions& opt = {});

enum class SweepAxis { mu, omega_drive };

struct SweepResult {
  SweepAxis axis = SweepAxis::mu;
  Eigen::VectorXd grid;
  Eigen::MatrixXd quasienergies;           // row per grid point, ascending
  std::vector<std::vector<Parity>> parity; // [point][level]
  std::vector<std::uint8_t> failed;        // eigensolver failures, sweep continues
  Eigen::VectorXd min_even_gap_per_point;  // circular metric, adjacent levels
  Eigen::VectorXd min_odd_gap_per_point;
  double min_even_gap = 0.0;
  double min_odd_gap = 0.0;
};

// Repeats floquet_solve along a parameter grid. Dimension capped at 512.
SweepResult quasienergy_sweep(const DimerParams& base, SweepAxis axis,
                              const std::vector<double>& grid,
                              const EvolveOptions& opt = {});

struct SplittingResult {
  double splitting = 0.0;       // max pairwise circular distance in the zone
  double tunneling_time = 0.0;  // pi / splitting; infinity when degenerate
  double zone_width = 0.0;
  bool degenerate_warning = false;  // indices were not near-degenerate
};

// Width of the multiplet spanned by the given states. subzone_divisor folds
// the Brillouin zone to width omega/subzone_divisor first, which removes the
// deliberate ~omega/k offsets within a period-k multiplet and leaves only the
// dynamical splitting.
SplittingResult doublet_splitting(const FloquetSolution& fs, const std::vector<int>& indices,
                                  int subzone_divisor = 1);

} // namespace dimerlab
