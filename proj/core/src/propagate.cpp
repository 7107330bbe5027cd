#include "dimerlab/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "dimerlab/model.hpp"
#include "dimerlab/ode.hpp"

namespace dimerlab {

namespace {

constexpr int panel_width = 64;

// Magnus fourth-order coefficients on the two Gauss nodes.
const double gauss_shift = std::sqrt(3.0) / 6.0;  // nodes at 1/2 -+ this
const double cf_big = 0.25 + gauss_shift;         // weight of the nearer node
const double cf_small = 0.25 - gauss_shift;

// Triple-jump composition factors turning a symmetric fourth-order step
// into a sixth-order one.
const double jump_outer = 1.0 / (2.0 - std::pow(2.0, 0.2));
const double jump_inner = 1.0 - 2.0 * jump_outer;

// y = Mhat * x columnwise for the normalized tridiagonal generator.
void tridiag_apply(const double* dn, const double* off, int m, int cols,
                   const Complex* x, Complex* y) {
  for (int c = 0; c < cols; ++c, x += m, y += m) {
    if (m == 1) {
      y[0] = dn[0] * x[0];
      continue;
    }
    y[0] = dn[0] * x[0] + off[0] * x[1];
    for (int j = 1; j < m - 1; ++j)
      y[j] = dn[j] * x[j] + off[j - 1] * x[j - 1] + off[j] * x[j + 1];
    y[m - 1] = dn[m - 1] * x[m - 1] + off[m - 2] * x[m - 2];
  }
}

// tnext = 2*Mhat*tcur - tprev and acc += coef*tnext, fused per column.
void cheb_iterate(const double* dn, const double* off, int m, int cols,
                  const Complex* tprev, const Complex* tcur, Complex* tnext,
                  Complex coef, Complex* acc) {
  for (int c = 0; c < cols; ++c, tprev += m, tcur += m, tnext += m, acc += m) {
    if (m == 1) {
      const Complex v = 2.0 * dn[0] * tcur[0] - tprev[0];
      tnext[0] = v;
      acc[0] += coef * v;
      continue;
    }
    {
      const Complex v = 2.0 * (dn[0] * tcur[0] + off[0] * tcur[1]) - tprev[0];
      tnext[0] = v;
      acc[0] += coef * v;
    }
    for (int j = 1; j < m - 1; ++j) {
      const Complex v =
          2.0 * (dn[j] * tcur[j] + off[j - 1] * tcur[j - 1] + off[j] * tcur[j + 1]) -
          tprev[j];
      tnext[j] = v;
      acc[j] += coef * v;
    }
    {
      const int j = m - 1;
      const Complex v = 2.0 * (dn[j] * tcur[j] + off[j - 1] * tcur[j - 1]) - tprev[j];
      tnext[j] = v;
      acc[j] += coef * v;
    }
  }
}

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

double unitarity_defect_of(const Matrix& u) {
  const int m = static_cast<int>(u.rows());
  return max_abs(Matrix(u.adjoint() * u - Matrix::Identity(m, m)));
}

// Schur form of a (numerically) unitary matrix: its Schur vectors are
// orthonormal eigenvectors and the strict upper triangle measures the
// per-pair defect.
struct UnitarySchur {
  Eigen::VectorXcd eigenvalues;
  Matrix vectors;
  double max_residual;  // largest 2-norm of a strict upper-triangle column
};

UnitarySchur schur_unitary(Matrix a) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  UnitarySchur out;
  out.eigenvalues.resize(m);
  out.vectors.resize(m, m);
  lapack_int sdim = 0;
  const lapack_int info =
      LAPACKE_zgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, m, a.data(), m, &sdim,
                    out.eigenvalues.data(), out.vectors.data(), m);
  if (info != 0)
    throw NumericalError("Schur decomposition failed, LAPACK info = " + std::to_string(info));
  double res = 0.0;
  for (int l = 1; l < m; ++l) res = std::max(res, a.col(l).head(l).norm());
  out.max_residual = res;
  return out;
}

std::string calibration_key(const DimerParams& p, double tol, Engine engine) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d|%.17g|%.17g|%.17g|%.17g|%.17g|%d", p.n, p.omega,
                p.kappa, p.mu, p.omega_drive, tol, static_cast<int>(engine));
  return buf;
}

// Process-wide calibration cache; the library is single-threaded by design
// (workers would own separate processes).
std::map<std::string, std::pair<int, bool>>& calibration_cache() {
  static std::map<std::string, std::pair<int, bool>> cache;
  return cache;
}

void advance_adaptive(const DimerParams& p, Matrix& block, double t0, double t1, double tol) {
  const int m = p.dim();
  const int total = static_cast<int>(block.cols());
  Eigen::VectorXd adiag(m), bdiag(m);
  DimerParams undriven = p;
  undriven.mu = 0.0; // drive enters through bdiag at each evaluation time
  hamiltonian_diagonal(undriven, 0.0, adiag);
  for (int j = 0; j < m; ++j) bdiag[j] = 2.0 * j - p.n;
  Eigen::VectorXd aoff;
  hopping_coefficients(p, aoff);
  aoff *= -0.5 * p.omega;
  Eigen::VectorXd diag(m);

  OdeOptions ode;
  ode.rtol = 0.1 * tol;
  ode.atol = 1e-3 * tol;

  // Chunk so the integrator's stage buffers stay within a few hundred MB.
  const int chunk = std::max(1, std::min(total, (1 << 20) / m));
  for (int c0 = 0; c0 < total; c0 += chunk) {
    const int w = std::min(chunk, total - c0);
    Vector y(static_cast<Eigen::Index>(m) * w);
    std::memcpy(y.data(), block.data() + static_cast<std::ptrdiff_t>(c0) * m,
                sizeof(Complex) * m * w);
    auto rhs = [&](double t, const Vector& v, Vector& dv) {
      const double f = p.mu * std::cos(p.omega_drive * t);
      diag = adiag + f * bdiag;
      const Complex* x = v.data();
      Complex* y_out = dv.data();
      const Complex mi(0.0, -1.0);
      for (int c = 0; c < w; ++c, x += m, y_out += m) {
        if (m == 1) {
          y_out[0] = mi * (diag[0] * x[0]);
          continue;
        }
        y_out[0] = mi * (diag[0] * x[0] + aoff[0] * x[1]);
        for (int j = 1; j < m - 1; ++j)
          y_out[j] = mi * (diag[j] * x[j] + aoff[j - 1] * x[j - 1] + aoff[j] * x[j + 1]);
        y_out[m - 1] = mi * (diag[m - 1] * x[m - 1] + aoff[m - 2] * x[m - 2]);
      }
    };
    integrate_adaptive(rhs, y, t0, t1, ode);
    std::memcpy(block.data() + static_cast<std::ptrdiff_t>(c0) * m, y.data(),
                sizeof(Complex) * m * w);
  }
}

bool use_adaptive(const DimerParams& p, const EvolveOptions& opt) {
  if (opt.engine == Engine::adaptive) return true;
  if (opt.engine == Engine::automatic) return p.dim() <= 65;
  return false;
}

} // namespace

double fold_to_zone(double x, double width) {
  if (!(width > 0.0)) throw StructuralError("fold_to_zone: width must be positive");
  double y = std::remainder(x, width);
  if (y >= 0.5 * width) y -= width;
  if (y < -0.5 * width) y += width;
  return y;
}

double circular_distance(double a, double b, double width) {
  if (!(width > 0.0)) throw StructuralError("circular_distance: width must be positive");
  return std::abs(std::remainder(a - b, width));
}

SpectralPropagator::SpectralPropagator(const DimerParams& params, const EvolveOptions& opt)
    : params_(params), opt_(opt) {
  params_.validate();
  const int m = params_.dim();
  adiag_.resize(m);
  DimerParams undriven = params_;
  undriven.mu = 0.0; // drive enters through bdiag_ at the quadrature nodes
  hamiltonian_diagonal(undriven, 0.0, adiag_);
  hopping_coefficients(params_, aoff_);
  aoff_ *= -0.5 * params_.omega;
  bdiag_.resize(m);
  for (int j = 0; j < m; ++j) bdiag_[j] = 2.0 * j - params_.n;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int j = 0; j < m; ++j) {
    double r = 0.0;
    if (j > 0) r += std::abs(aoff_[j - 1]);
    if (j < m - 1) r += std::abs(aoff_[j]);
    lo = std::min(lo, adiag_[j] - r - params_.mu * std::abs(bdiag_[j]));
    hi = std::max(hi, adiag_[j] + r + params_.mu * std::abs(bdiag_[j]));
  }
  half_width_ = 0.5 * (hi - lo);
  norm_diag_.resize(m);
  norm_off_.resize(std::max(0, m - 1));
  calibrate();
}

void SpectralPropagator::exponential(Complex* data, int cols, double coeff_a,
                                     double coeff_b, double* phase) {
  const int m = params_.dim();
  // Effective generator M = coeff_a * A + coeff_b * B; Gershgorin bounds
  // guarantee the normalized spectrum stays inside [-1, 1].
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int j = 0; j < m; ++j) {
    const double d = coeff_a * adiag_[j] + coeff_b * bdiag_[j];
    double r = 0.0;
    if (j > 0) r += std::abs(coeff_a * aoff_[j - 1]);
    if (j < m - 1) r += std::abs(coeff_a * aoff_[j]);
    lo = std::min(lo, d - r);
    hi = std::max(hi, d + r);
  }
  const double center = 0.5 * (hi + lo);
  double rho = 0.5 * (hi - lo);
  if (rho < 1e-13 * (std::abs(center) + 1.0)) {
    if (phase) *phase += center;
    return;
  }
  rho *= 1.0 + 1e-12;

  for (int j = 0; j < m; ++j)
    norm_diag_[j] = (coeff_a * adiag_[j] + coeff_b * bdiag_[j] - center) / rho;
  for (int j = 0; j + 1 < m; ++j) norm_off_[j] = coeff_a * aoff_[j] / rho;

  // Bessel coefficients by downward recurrence, seeded well above the
  // truncation order and normalized through J0 + 2*sum J_{2k} = 1.
  const int k_max =
      static_cast<int>(rho + 16.0 * std::cbrt(rho + 4.0) + 40.0);
  const int k_seed = k_max + 2 * static_cast<int>(std::sqrt(static_cast<double>(k_max))) + 20;
  bessel_.assign(k_max + 1, 0.0);
  double jkp1 = 0.0, jk = 1e-280;
  for (int k = k_seed; k >= 1; --k) {
    const double jkm1 = (2.0 * k / rho) * jk - jkp1;
    jkp1 = jk;
    jk = jkm1;
    if (k - 1 <= k_max) bessel_[k - 1] = jk;
    if (std::abs(jk) > 1e250) {
      jk *= 1e-250;
      jkp1 *= 1e-250;
      for (double& b : bessel_) b *= 1e-250;
    }
  }
  double norm = bessel_[0];
  for (int k = 2; k <= k_max; k += 2) norm += 2.0 * bessel_[k];
  for (double& b : bessel_) b /= norm;
  int k_eff = k_max;
  while (k_eff > 1 && std::abs(bessel_[k_eff]) < 1e-16) --k_eff;

  Matrix& t0 = work_[0];
  Matrix& t1 = work_[1];
  Matrix& t2 = work_[2];
  Matrix& acc = work_[3];
  const std::size_t bytes = sizeof(Complex) * m * cols;
  std::memcpy(t0.data(), data, bytes);
  tridiag_apply(norm_diag_.data(), norm_off_.data(), m, cols, t0.data(), t1.data());

  // exp(-i(center + rho*Mhat)) = e^{-i center} (J0 + 2 sum (-i)^k J_k T_k(Mhat)).
  {
    Eigen::Map<Matrix> t0_map(t0.data(), m, cols), t1_map(t1.data(), m, cols),
        acc_map(acc.data(), m, cols);
    acc_map = bessel_[0] * t0_map + Complex(0.0, -2.0 * bessel_[1]) * t1_map;
  }
  Complex* buf_prev = t0.data();
  Complex* buf_cur = t1.data();
  Complex* buf_next = t2.data();
  for (int k = 2; k <= k_eff; ++k) {
    Complex coef;
    switch (k & 3) {
      case 0: coef = Complex(2.0 * bessel_[k], 0.0); break;
      case 1: coef = Complex(0.0, -2.0 * bessel_[k]); break;
      case 2: coef = Complex(-2.0 * bessel_[k], 0.0); break;
      default: coef = Complex(0.0, 2.0 * bessel_[k]); break;
    }
    cheb_iterate(norm_diag_.data(), norm_off_.data(), m, cols, buf_prev, buf_cur,
                 buf_next, coef, acc.data());
    Complex* spare = buf_prev;
    buf_prev = buf_cur;
    buf_cur = buf_next;
    buf_next = spare;
  }
  std::memcpy(data, acc.data(), bytes);
  if (phase) *phase += center;
}

void SpectralPropagator::magnus_step(Complex* data, int cols, double t, double h,
                                     double* phase) {
  const double f1 = params_.mu * std::cos(params_.omega_drive * (t + (0.5 - gauss_shift) * h));
  const double f2 = params_.mu * std::cos(params_.omega_drive * (t + (0.5 + gauss_shift) * h));
  // The early node carries the larger weight in the first factor applied.
  exponential(data, cols, 0.5 * h, h * (cf_big * f1 + cf_small * f2), phase);
  exponential(data, cols, 0.5 * h, h * (cf_small * f1 + cf_big * f2), phase);
}

void SpectralPropagator::advance_raw(Complex* data, int cols, double t0, double t1,
                                     int steps, bool high_order) {
  if (steps <= 0 || t1 == t0) return;
  const int m = params_.dim();
  const double h = (t1 - t0) / steps;
  const int w_max = std::min(cols, panel_width);
  for (Matrix& w : work_)
    if (w.rows() != m || w.cols() < w_max) w.resize(m, w_max);

  double phase_total = 0.0;
  for (int c0 = 0; c0 < cols; c0 += panel_width) {
    const int w = std::min(panel_width, cols - c0);
    Complex* panel = data + static_cast<std::ptrdiff_t>(c0) * m;
    double* phase = (c0 == 0) ? &phase_total : nullptr;
    for (int s = 0; s < steps; ++s) {
      const double t = t0 + h * s;
      if (!high_order) {
        magnus_step(panel, w, t, h, phase);
      } else {
        const double h1 = jump_outer * h;
        const double h0 = jump_inner * h;
        magnus_step(panel, w, t, h1, phase);
        magnus_step(panel, w, t + h1, h0, phase);
        magnus_step(panel, w, t + h1 + h0, h1, phase);
      }
    }
  }
  const Complex rot = std::polar(1.0, -phase_total);
  Eigen::Map<Matrix> view(data, m, cols);
  view *= rot;
}

double SpectralPropagator::estimated_cost(double steps_per_period, bool high_order) const {
  const double h = params_.period() / steps_per_period;
  auto exp_cost = [&](double h_sub) {
    const double rho = 0.5 * std::abs(h_sub) * half_width_;
    return rho + 16.0 * std::cbrt(rho + 4.0) + 40.0;
  };
  double per_step;
  if (!high_order) {
    per_step = 2.0 * exp_cost(0.5 * h);
  } else {
    per_step = 4.0 * exp_cost(0.5 * jump_outer * h) + 2.0 * exp_cost(0.5 * jump_inner * h);
  }
  return steps_per_period * per_step;
}

void SpectralPropagator::calibrate() {
  const std::string key = calibration_key(params_, opt_.tol, opt_.engine);
  auto& cache = calibration_cache();
  if (auto it = cache.find(key); it != cache.end()) {
    steps_per_period_ = it->second.first;
    high_order_ = it->second.second;
    return;
  }

  const int m = params_.dim();
  const int probes = std::min(3, m);
  Matrix reference(m, probes);
  std::mt19937_64 rng(0x64696d6572ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int c = 0; c < probes; ++c) {
    for (int j = 0; j < m; ++j) reference(j, c) = Complex(gauss(rng), gauss(rng));
    reference.col(c).normalize();
  }

  // Calibrate over half a period against a half-size error budget, so a full
  // period stays within tol.
  const double span = 0.5 * params_.period();
  const double target = 0.5 * opt_.tol;
  const int cap = std::max(16, opt_.max_steps_per_period / 2);

  auto measured_error = [&](int steps, bool high) {
    Matrix coarse = reference;
    Matrix fine = reference;
    advance_raw(coarse.data(), probes, 0.0, span, steps, high);
    advance_raw(fine.data(), probes, 0.0, span, 2 * steps, high);
    double err = 0.0;
    for (int c = 0; c < probes; ++c) err = std::max(err, (coarse.col(c) - fine.col(c)).norm());
    return err;
  };

  auto settle = [&](bool high) -> int {
    const double order = high ? 6.0 : 4.0;
    const double richardson = std::pow(2.0, order) / (std::pow(2.0, order) - 1.0);
    int n = 32;
    double err = measured_error(n, high);
    // Reach the asymptotic regime before trusting the order for extrapolation.
    for (int guard = 0; err > 0.3 && n < cap && guard < 6; ++guard) {
      n = std::min(cap, n * 4);
      err = measured_error(n, high);
    }
    for (int round = 0; round < 4 && err > target; ++round) {
      if (n >= cap)
        throw NumericalError("spectral propagator cannot reach the tolerance within the "
                             "step budget; use Engine::adaptive");
      double factor = std::pow(err * richardson / target, 1.0 / order) * 1.2;
      factor = std::clamp(factor, 1.05, 64.0);
      n = std::clamp(static_cast<int>(std::ceil(n * factor / 8.0)) * 8, n + 8, cap);
      err = measured_error(n, high);
    }
    if (err > target)
      throw NumericalError("spectral propagator calibration failed to converge; "
                           "use Engine::adaptive");
    return n;
  };

  bool high = (opt_.engine == Engine::spectral_high);
  int n = settle(high);
  if (opt_.engine == Engine::automatic && !high && n > 4000) {
    const int n_high = settle(true);
    if (estimated_cost(2.0 * n_high, true) < estimated_cost(2.0 * n, false)) {
      high = true;
      n = n_high;
    }
  }

  steps_per_period_ = 2 * n;  // measured on half a period
  high_order_ = high;
  cache[key] = {steps_per_period_, high_order_};
}

void SpectralPropagator::advance_data(Complex* data, int cols, double t0, double t1) {
  if (t1 < t0) throw StructuralError("SpectralPropagator: backward evolution not supported");
  if (t1 == t0 || cols == 0) return;
  const double periods = (t1 - t0) / params_.period();
  const int steps = std::max(1, static_cast<int>(std::ceil(steps_per_period_ * periods)));
  advance_raw(data, cols, t0, t1, steps, high_order_);
}

void SpectralPropagator::advance(Matrix& block, double t0, double t1) {
  if (block.rows() != params_.dim())
    throw StructuralError("SpectralPropagator: block row count does not match the basis");
  advance_data(block.data(), static_cast<int>(block.cols()), t0, t1);
}

void SpectralPropagator::advance(Vector& psi, double t0, double t1) {
  if (psi.size() != params_.dim())
    throw StructuralError("SpectralPropagator: state length does not match the basis");
  advance_data(psi.data(), 1, t0, t1);
}

ManyBodyState evolve_state(const DimerParams& params, const ManyBodyState& state,
                           double t0, double t1, const EvolveOptions& opt) {
  params.validate();
  if (opt.tol < 1e-13 || opt.tol > 1e-6)
    throw StructuralError("evolve_state: tol must lie in [1e-13, 1e-6]");
  if (t1 < t0) throw StructuralError("evolve_state: t1 must not precede t0");
  if (state.dim() != params.dim())
    throw StructuralError("evolve_state: state length does not match the basis");
  state.require_normalized(1e-8);

  ManyBodyState out;
  out.amps = state.amps;
  out.time = t1;
  if (t1 == t0) return out;
  if (use_adaptive(params, opt)) {
    Matrix block(params.dim(), 1);
    block.col(0) = out.amps;
    advance_adaptive(params, block, t0, t1, opt.tol);
    out.amps = block.col(0);
  } else {
    SpectralPropagator prop(params, opt);
    prop.advance(out.amps, t0, t1);
  }
  return out;
}

Matrix propagator_window(const DimerParams& params, double t0, double t1,
                         const EvolveOptions& opt) {
  params.validate();
  if (t1 < t0) throw StructuralError("propagator_window: t1 must not precede t0");
  const int m = params.dim();
  if (m > opt.dense_limit)
    throw StructuralError(
        "propagator_window: dimension " + std::to_string(m) + " exceeds the dense limit " +
        std::to_string(opt.dense_limit) + "; use matrix-free observables instead");
  Matrix u = Matrix::Identity(m, m);
  if (t1 == t0) return u;
  if (use_adaptive(params, opt)) {
    advance_adaptive(params, u, t0, t1, opt.tol);
  } else {
    SpectralPropagator prop(params, opt);
    prop.advance(u, t0, t1);
  }
  return u;
}

Matrix monodromy(const DimerParams& params, const EvolveOptions& opt) {
  Matrix u = propagator_window(params, 0.0, params.period(), opt);
  if (opt.check_unitarity) {
    const double defect = unitarity_defect_of(u);
    if (defect > 1e-8)
      throw NumericalError("monodromy unitarity defect " + std::to_string(defect) +
                           " exceeds 1e-8");
  }
  return u;
}

Matrix half_period_operator(const DimerParams& params, const EvolveOptions& opt) {
  Matrix u_half = propagator_window(params, 0.0, 0.5 * params.period(), opt);
  return u_half.colwise().reverse();
}

HalfPeriodSymmetry half_period_symmetry(const DimerParams& params, const EvolveOptions& opt) {
  HalfPeriodSymmetry out;
  out.v = half_period_operator(params, opt);
  const Matrix u = monodromy(params, opt);
  out.witness = max_abs(Matrix(out.v * out.v - u));
  return out;
}

namespace {

struct RankedLevel {
  double quasienergy;
  int source;
};

FloquetSolution assemble_solution(const DimerParams& params, const Matrix& vectors,
                                  const std::vector<double>& quasienergies,
                                  const std::vector<Parity>& parity, double residual,
                                  double defect) {
  const int m = params.dim();
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return quasienergies[a] < quasienergies[b]; });

  FloquetSolution fs;
  fs.omega = params.omega_drive;
  fs.period = params.period();
  fs.quasienergies.resize(m);
  fs.states.resize(m, m);
  fs.parity.resize(m);
  for (int l = 0; l < m; ++l) {
    fs.quasienergies[l] = quasienergies[order[l]];
    fs.states.col(l) = vectors.col(order[l]);
    fs.parity[l] = parity[order[l]];
  }
  fs.max_residual = residual;
  fs.unitarity_defect = defect;
  return fs;
}

} // namespace

FloquetSolution floquet_solve(const DimerParams& params, const EvolveOptions& opt) {
  params.validate();
  Matrix v = half_period_operator(params, opt);
  double defect = std::numeric_limits<double>::quiet_NaN();
  if (opt.check_unitarity) {
    defect = unitarity_defect_of(v);
    if (defect > 1e-8)
      throw NumericalError("half-period operator unitarity defect " + std::to_string(defect) +
                           " exceeds 1e-8");
  }
  UnitarySchur schur = schur_unitary(std::move(v));

  const int m = params.dim();
  const double t_period = params.period();
  std::vector<double> eps(m);
  std::vector<Parity> parity(m);
  for (int l = 0; l < m; ++l) {
    const double theta = std::arg(schur.eigenvalues[l]);
    eps[l] = fold_to_zone(-2.0 * theta / t_period, params.omega_drive);
    // The eigenvalue of V factors as (parity sign) * exp(-i eps T / 2); the
    // sign is read off after removing the quasienergy phase.
    const double sign = std::cos(theta + 0.5 * eps[l] * t_period);
    parity[l] = (sign > 0.0) ? Parity::even : Parity::odd;
  }
  return assemble_solution(params, schur.vectors, eps, parity, schur.max_residual, defect);
}

FloquetSolution floquet_decompose(const Matrix& u, const DimerParams& params,
                                  const EvolveOptions& opt) {
  params.validate();
  const int m = params.dim();
  if (u.rows() != m || u.cols() != m)
    throw StructuralError("floquet_decompose: matrix size does not match the basis");
  const double defect = unitarity_defect_of(u);
  if (defect > 1e-6)
    throw NumericalError("floquet_decompose: input unitarity defect " +
                         std::to_string(defect) + " exceeds 1e-6");

  UnitarySchur schur = schur_unitary(u);
  const double t_period = params.period();
  std::vector<double> eps(m);
  for (int l = 0; l < m; ++l)
    eps[l] = fold_to_zone(-std::arg(schur.eigenvalues[l]) / t_period, params.omega_drive);

  // Numerically degenerate eigenvalue clusters mix the symmetry branches;
  // diagonalizing the half-period operator inside each cluster separates them.
  const Matrix v = half_period_operator(params, opt);
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::arg(schur.eigenvalues[a]) < std::arg(schur.eigenvalues[b]);
  });
  const double cluster_tol = 1e-7;
  std::vector<std::vector<int>> clusters;
  for (int idx : order) {
    if (!clusters.empty()) {
      const Complex prev = schur.eigenvalues[clusters.back().back()];
      if (std::abs(schur.eigenvalues[idx] - prev) <= cluster_tol) {
        clusters.back().push_back(idx);
        continue;
      }
    }
    clusters.push_back({idx});
  }
  if (clusters.size() > 1) {
    const Complex first = schur.eigenvalues[clusters.front().front()];
    const Complex last = schur.eigenvalues[clusters.back().back()];
    if (std::abs(first - last) <= cluster_tol) {
      for (int idx : clusters.back()) clusters.front().push_back(idx);
      clusters.pop_back();
    }
  }
  for (const auto& cluster : clusters) {
    if (cluster.size() < 2) continue;
    const int c = static_cast<int>(cluster.size());
    Matrix qc(m, c);
    for (int i = 0; i < c; ++i) qc.col(i) = schur.vectors.col(cluster[i]);
    const Matrix projected = qc.adjoint() * (v * qc);
    Eigen::ComplexEigenSolver<Matrix> ces(projected);
    if (ces.info() != Eigen::Success)
      throw NumericalError("floquet_decompose: cluster eigensolver failed");
    Matrix rotated = qc * ces.eigenvectors();
    Eigen::HouseholderQR<Matrix> qr(rotated);
    Matrix thin = qr.householderQ() * Matrix::Identity(m, c);
    for (int i = 0; i < c; ++i) schur.vectors.col(cluster[i]) = thin.col(i);
  }

  std::vector<Parity> parity(m);
  const Matrix vq = v * schur.vectors;
  for (int l = 0; l < m; ++l) {
    const Complex expect = schur.vectors.col(l).dot(vq.col(l));
    const Complex sigma = expect * std::polar(1.0, 0.5 * eps[l] * t_period);
    parity[l] = (sigma.real() > 0.0) ? Parity::even : Parity::odd;
  }
  return assemble_solution(params, schur.vectors, eps, parity, schur.max_residual, defect);
}

namespace {

// Walks one state vector across uniformly spaced samples, invoking record at
// every sample time (including t = 0).
template <class Record>
void sample_evolution(const DimerParams& params, const Vector& psi0, int horizon_periods,
                      int samples_per_period, const EvolveOptions& opt, Record&& record) {
  const int n_samples = horizon_periods * samples_per_period;
  const double dt = params.period() / samples_per_period;
  Vector psi = psi0;
  record(0, 0.0, psi);
  std::optional<SpectralPropagator> prop;
  if (!use_adaptive(params, opt)) prop.emplace(params, opt);
  for (int k = 1; k <= n_samples; ++k) {
    const double t_prev = (k - 1) * dt;
    const double t_now = k * dt;
    if (prop) {
      prop->advance(psi, t_prev, t_now);
    } else {
      Matrix block(params.dim(), 1);
      block.col(0) = psi;
      advance_adaptive(params, block, t_prev, t_now, opt.tol);
      psi = block.col(0);
    }
    record(k, t_now, psi);
  }
}

} // namespace

TimeSeries return_probability_series(const DimerParams& params, const ManyBodyState& psi0,
                                     int horizon_periods, int samples_per_period,
                                     const EvolveOptions& opt) {
  params.validate();
  if (horizon_periods < 1 || samples_per_period < 1)
    throw StructuralError("return_probability_series: horizon and sampling must be positive");
  if (psi0.dim() != params.dim())
    throw StructuralError("return_probability_series: state length mismatch");
  psi0.require_normalized(1e-8);

  const int n_samples = horizon_periods * samples_per_period;
  TimeSeries series;
  series.times.resize(n_samples + 1);
  series.values.resize(n_samples + 1);
  sample_evolution(params, psi0.amps, horizon_periods, samples_per_period, opt,
                   [&](int k, double t, const Vector& psi) {
                     series.times[k] = t;
                     series.values[k] = std::norm(psi0.amps.dot(psi));
                   });
  return series;
}

OccupationSeries fock_occupation_series(const DimerParams& params, const ManyBodyState& psi0,
                                        int horizon_periods, int samples_per_period,
                                        const EvolveOptions& opt) {
  params.validate();
  if (horizon_periods < 1 || samples_per_period < 1)
    throw StructuralError("fock_occupation_series: horizon and sampling must be positive");
  if (psi0.dim() != params.dim())
    throw StructuralError("fock_occupation_series: state length mismatch");
  psi0.require_normalized(1e-8);

  const int n_samples = horizon_periods * samples_per_period;
  OccupationSeries series;
  series.times.resize(n_samples + 1);
  series.occupation.resize(params.dim(), n_samples + 1);
  sample_evolution(params, psi0.amps, horizon_periods, samples_per_period, opt,
                   [&](int k, double t, const Vector& psi) {
                     series.times[k] = t;
                     series.occupation.col(k) = psi.cwiseAbs2();
                   });
  return series;
}

SweepResult quasienergy_sweep(const DimerParams& base, SweepAxis axis,
                              const std::vector<double>& grid, const EvolveOptions& opt) {
  base.validate();
  if (base.n > 512)
    throw StructuralError("quasienergy_sweep: N must stay at or below 512 for dense sweeps");
  if (grid.empty()) throw StructuralError("quasienergy_sweep: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw StructuralError("quasienergy_sweep: grid must be strictly increasing");

  const int m = base.dim();
  const int g = static_cast<int>(grid.size());
  SweepResult result;
  result.axis = axis;
  result.grid = Eigen::Map<const Eigen::VectorXd>(grid.data(), g);
  result.quasienergies.resize(g, m);
  result.parity.resize(g);
  result.failed.assign(g, 0);
  result.min_even_gap_per_point.resize(g);
  result.min_odd_gap_per_point.resize(g);
  result.min_even_gap = std::numeric_limits<double>::infinity();
  result.min_odd_gap = std::numeric_limits<double>::infinity();

  for (int i = 0; i < g; ++i) {
    DimerParams p = base;
    if (axis == SweepAxis::mu)
      p.mu = grid[i];
    else
      p.omega_drive = grid[i];
    try {
      p.validate();
      const FloquetSolution fs = floquet_solve(p, opt);
      result.quasienergies.row(i) = fs.quasienergies.transpose();
      result.parity[i] = fs.parity;
      for (Parity cls : {Parity::even, Parity::odd}) {
        std::vector<double> levels;
        for (int l = 0; l < m; ++l)
          if (fs.parity[l] == cls) levels.push_back(fs.quasienergies[l]);
        double min_gap = std::numeric_limits<double>::infinity();
        if (levels.size() >= 2) {
          for (std::size_t a = 0; a + 1 < levels.size(); ++a)
            min_gap = std::min(min_gap, levels[a + 1] - levels[a]);
          min_gap = std::min(min_gap, fs.omega - (levels.back() - levels.front()));
        }
        if (cls == Parity::even) {
          result.min_even_gap_per_point[i] = min_gap;
          result.min_even_gap = std::min(result.min_even_gap, min_gap);
        } else {
          result.min_odd_gap_per_point[i] = min_gap;
          result.min_odd_gap = std::min(result.min_odd_gap, min_gap);
        }
      }
    } catch (const NumericalError&) {
      result.failed[i] = 1;
      result.quasienergies.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
      result.parity[i].assign(m, Parity::even);
      result.min_even_gap_per_point[i] = std::numeric_limits<double>::quiet_NaN();
      result.min_odd_gap_per_point[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return result;
}

SplittingResult doublet_splitting(const FloquetSolution& fs, const std::vector<int>& indices,
                                  int subzone_divisor) {
  if (indices.size() < 2)
    throw StructuralError("doublet_splitting: need at least two state indices");
  if (subzone_divisor < 1)
    throw StructuralError("doublet_splitting: subzone divisor must be positive");
  const int m = static_cast<int>(fs.quasienergies.size());
  for (int idx : indices)
    if (idx < 0 || idx >= m)
      throw StructuralError("doublet_splitting: state index out of range");

  SplittingResult out;
  out.zone_width = fs.omega / subzone_divisor;
  double width = 0.0;
  for (std::size_t a = 0; a < indices.size(); ++a)
    for (std::size_t b = a + 1; b < indices.size(); ++b)
      width = std::max(width, circular_distance(fs.quasienergies[indices[a]],
                                                fs.quasienergies[indices[b]], out.zone_width));
  out.splitting = width;
  out.tunneling_time =
      width > 0.0 ? std::numbers::pi / width : std::numeric_limits<double>::infinity();
  out.degenerate_warning = width > out.zone_width / m;
  return out;
}

} // namespace dimerlab
