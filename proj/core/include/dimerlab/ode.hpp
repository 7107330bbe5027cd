#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "dimerlab/errors.hpp"

namespace dimerlab {

// Adaptive embedded Runge-Kutta stepper (Dormand-Prince 5(4), FSAL) over any
// Eigen vector type, real or complex.  The contract is accuracy: local error
// is controlled against atol + rtol*|y| with a PI step controller.  Callers
// that care about norm conservation must check it themselves; the stepper
// never rescales the state.
struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 0.0;   // 0 = choose automatically
  double max_step = std::numeric_limits<double>::infinity();
  std::int64_t max_steps = 50'000'000;
};

struct OdeStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  double last_step = 0.0;
};

namespace detail {

template <class Vec>
double error_ratio(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol) {
  const auto scale = (atol + rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).matrix();
  const double n = static_cast<double>(err.size());
  return std::sqrt((err.cwiseAbs().array() / scale.array()).square().sum() / n);
}

} // namespace detail

// Integrates dy/dt = f(t, y) from t0 to t1 (either direction) in place.
// f must have signature f(double t, const Vec& y, Vec& dydt).
template <class F, class Vec>
OdeStats integrate_adaptive(F&& f, Vec& y, double t0, double t1, const OdeOptions& opt = {}) {
  // Dormand-Prince coefficients.
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (t1 == t0) return {};
  const double dir = (t1 > t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  OdeStats stats;
  Vec k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()),
      k6(y.size()), k7(y.size()), ytmp(y.size()), ynew(y.size()), yerr(y.size());

  double t = t0;
  double h = opt.initial_step > 0.0 ? opt.initial_step : span * 1e-4;
  h = std::min({h, span, opt.max_step});

  f(t, y, k1);
  double prev_ratio = 1.0;
  const double floor_step = span * 1e-14;

  while (dir * (t1 - t) > 0.0) {
    if (stats.accepted + stats.rejected >= opt.max_steps)
      throw NumericalError("integrate_adaptive: step budget exhausted at t = " +
                           std::to_string(t));
    h = std::min(h, std::min(opt.max_step, std::abs(t1 - t)));
    if (h < floor_step)
      throw NumericalError("integrate_adaptive: step size underflow at t = " +
                           std::to_string(t));
    const double hs = dir * h;

    ytmp = y + hs * a21 * k1;
    f(t + c2 * hs, ytmp, k2);
    ytmp = y + hs * (a31 * k1 + a32 * k2);
    f(t + c3 * hs, ytmp, k3);
    ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * hs, ytmp, k4);
    ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * hs, ytmp, k5);
    ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + hs, ytmp, k6);
    ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + hs, ynew, k7); // FSAL
    yerr = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double ratio = detail::error_ratio(yerr, y, ynew, opt.atol, opt.rtol);
    if (ratio <= 1.0) {
      t += hs;
      y.swap(ynew);
      k1.swap(k7);
      ++stats.accepted;
      stats.last_step = h;
      // PI controller (Gustafsson): mild damping against oscillating h.
      const double grow =
          0.9 * std::pow(std::max(ratio, 1e-10), -0.7 / 5.0) * std::pow(prev_ratio, 0.4 / 5.0);
      h *= std::clamp(grow, 0.2, 5.0);
      prev_ratio = std::max(ratio, 1e-10);
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(ratio, -1.0 / 5.0));
    }
  }
  return stats;
}

} // namespace dimerlab
