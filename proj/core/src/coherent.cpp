#include "dimerlab/coherent.hpp"

#include <cmath>
#include <numbers>

namespace dimerlab {

namespace {

constexpr double pi = std::numbers::pi;

// Log-space amplitude magnitudes; phases are supplied by the caller.
// log((1 +- p)/2) are the half-angle squares of cos and sin.
void amplitude_magnitudes(int n, double p, Eigen::VectorXd& mag) {
  const double log_cos2 = std::log1p(p) - std::numbers::ln2;
  const double log_sin2 = std::log1p(-p) - std::numbers::ln2;
  const double lg_n = std::lgamma(n + 1.0);
  mag.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    double log_mag = 0.5 * (lg_n - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0));
    if (j > 0) log_mag += 0.5 * j * log_cos2;
    if (j < n) log_mag += 0.5 * (n - j) * log_sin2;
    mag[j] = std::exp(log_mag);
  }
}

} // namespace

ManyBodyState coherent_state(int n_particles, PhasePoint point) {
  if (n_particles < 1)
    throw StructuralError("coherent_state: need at least one particle");
  if (!(std::abs(point.p) <= 1.0) || !std::isfinite(point.phi))
    throw StructuralError("coherent_state: point must satisfy |p| <= 1 with finite phase");

  Eigen::VectorXd mag;
  amplitude_magnitudes(n_particles, point.p, mag);
  ManyBodyState state;
  state.amps.resize(n_particles + 1);
  for (int j = 0; j <= n_particles; ++j)
    state.amps[j] = std::polar(mag[j], (n_particles - j) * point.phi);

  const double norm = state.amps.norm();
  if (std::abs(norm - 1.0) > 1e-9)
    throw NumericalError("coherent_state: log-space normalization drifted to " +
                         std::to_string(norm));
  state.amps /= norm;
  state.time = 0.0;
  return state;
}

ManyBodyState coherent_state(const DimerParams& params, PhasePoint point) {
  params.validate();
  return coherent_state(params.n, point);
}

double husimi_value(const ManyBodyState& state, PhasePoint point) {
  state.require_normalized(1e-6);
  const ManyBodyState probe = coherent_state(state.dim() - 1, point);
  return std::min(1.0, std::norm(probe.amps.dot(state.amps)));
}

HusimiGrid husimi_grid(const ManyBodyState& state, int p_resolution, int phi_resolution) {
  if (p_resolution < 2 || phi_resolution < 2)
    throw StructuralError("husimi_grid: need at least two lattice points per axis");
  state.require_normalized(1e-6);

  const int n = state.dim() - 1;
  HusimiGrid grid;
  grid.p_axis.resize(p_resolution);
  for (int i = 0; i < p_resolution; ++i)
    grid.p_axis[i] = -1.0 + 2.0 * i / (p_resolution - 1);
  grid.phi_axis.resize(phi_resolution);
  for (int k = 0; k < phi_resolution; ++k)
    grid.phi_axis[k] = -pi + 2.0 * pi * (k + 1) / phi_resolution;
  grid.q.resize(p_resolution, phi_resolution);

  // <psi|theta,phi> = e^{i n phi} sum_j conj(psi_j) mag_j z^j with z = e^{-i phi};
  // the unimodular prefactor drops out of Q.
  Eigen::VectorXd mag;
  Vector w(n + 1);
  for (int i = 0; i < p_resolution; ++i) {
    amplitude_magnitudes(n, grid.p_axis[i], mag);
    for (int j = 0; j <= n; ++j) w[j] = std::conj(state.amps[j]) * mag[j];
    for (int k = 0; k < phi_resolution; ++k) {
      const Complex z = std::polar(1.0, -grid.phi_axis[k]);
      Complex s = w[n];
      for (int j = n - 1; j >= 0; --j) s = s * z + w[j];
      grid.q(i, k) = std::min(1.0, std::norm(s));
    }
  }
  return grid;
}

} // namespace dimerlab
