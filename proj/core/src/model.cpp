#include "dimerlab/model.hpp"

#include <cmath>
#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "dimerlab/errors.hpp"

namespace dimerlab {

ManyBodyState fock_state(int n_particles, int j) {
  if (n_particles < 1) throw StructuralError("fock_state: need n_particles >= 1");
  if (j < 0 || j > n_particles) throw StructuralError("fock_state: occupation out of range");
  ManyBodyState s;
  s.amps = Vector::Zero(n_particles + 1);
  s.amps[j] = 1.0;
  return s;
}

void hamiltonian_diagonal(const DimerParams& p, double t, Eigen::VectorXd& diag) {
  const int n = p.n;
  const double drive = p.mu * std::cos(p.omega_drive * t);
  diag.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    const double nj = static_cast<double>(n - j);
    diag[j] = p.kappa * (j * (j - 1.0) + nj * (nj - 1.0)) + drive * (2.0 * j - n);
  }
}

void hopping_coefficients(const DimerParams& p, Eigen::VectorXd& s) {
  const int n = p.n;
  s.resize(n);
  for (int j = 0; j < n; ++j)
    s[j] = std::sqrt((j + 1.0) * (n - j));
}

void apply_hamiltonian(const DimerParams& p, double t, const Vector& psi, Vector& out) {
  const int n = p.n;
  if (psi.size() != n + 1)
    throw StructuralError("apply_hamiltonian: state dimension does not match n_particles + 1");
  out.resize(n + 1);
  const double drive = p.mu * std::cos(p.omega_drive * t);
  const double half_hop = 0.5 * p.omega;
  // j = 0 and j = N rows touch one neighbor only.
  auto diag_at = [&](int j) {
    const double nj = static_cast<double>(n - j);
    return p.kappa * (j * (j - 1.0) + nj * (nj - 1.0)) + drive * (2.0 * j - n);
  };
  if (n == 0) { // single state, hopping absent
    out[0] = diag_at(0) * psi[0];
    return;
  }
  out[0] = diag_at(0) * psi[0] - half_hop * std::sqrt(1.0 * n) * psi[1];
  for (int j = 1; j < n; ++j) {
    const double s_up = std::sqrt((j + 1.0) * (n - j));   // couples to j+1
    const double s_dn = std::sqrt(j * (n - j + 1.0));     // couples to j-1
    out[j] = diag_at(j) * psi[j] - half_hop * (s_up * psi[j + 1] + s_dn * psi[j - 1]);
  }
  out[n] = diag_at(n) * psi[n] - half_hop * std::sqrt(1.0 * n) * psi[n - 1];
}

Vector apply_hamiltonian(const DimerParams& p, double t, const Vector& psi) {
  Vector out;
  apply_hamiltonian(p, t, psi, out);
  return out;
}

Eigen::VectorXd static_spectrum(const DimerParams& p) {
  p.validate();
  const int dim = p.dim();
  Eigen::VectorXd d;
  DimerParams undriven = p;
  undriven.mu = 0.0; // the static spectrum excludes the drive term
  hamiltonian_diagonal(undriven, 0.0, d);
  Eigen::VectorXd e;
  hopping_coefficients(p, e);
  e *= -0.5 * p.omega;
  const lapack_int info = LAPACKE_dstev(LAPACK_COL_MAJOR, 'N', dim, d.data(),
                                        dim > 1 ? e.data() : nullptr, nullptr, 1);
  if (info != 0)
    throw NumericalError("static_spectrum: tridiagonal eigensolver failed, info = " +
                         std::to_string(info));
  return d; // dstev returns eigenvalues ascending in place
}

void apply_site_swap(Vector& psi) {
  psi.reverseInPlace();
}

Vector site_swapped(const Vector& psi) {
  return psi.reverse();
}

} // namespace dimerlab
