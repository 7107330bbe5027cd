#pragma once
// Reference constructions that deliberately avoid the library's own code
// paths.  The Hamiltonian is assembled from two-site ladder operators on the
// full product space and projected onto the N-particle sector; propagation is
// a midpoint-factorized product of exact exponentials; coherent-state algebra
// comes from the closed-form binomial expression.  Tests compare the library
// against these, so agreement certifies both constructions at once.

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "dimerlab/params.hpp"
#include "dimerlab/state.hpp"

namespace oracle {

// H(t) on the N-particle sector, built via ladder operators a1 = a (x) 1,
// a2 = 1 (x) a on the (N+1)^2 product space.  Sector basis vector j is
// |j> (x) |N-j>, matching the library's |j, N-j> ordering.
inline Eigen::MatrixXd sector_hamiltonian(const dimerlab::DimerParams& p, double t) {
  const int d = p.n + 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (int m = 1; m < d; ++m) a(m - 1, m) = std::sqrt(double(m));
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  auto kron = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    Eigen::MatrixXd out(x.rows() * y.rows(), x.cols() * y.cols());
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j)
        out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
    return out;
  };
  const Eigen::MatrixXd a1 = kron(a, id), a2 = kron(id, a);
  const Eigen::MatrixXd n1 = a1.transpose() * a1, n2 = a2.transpose() * a2;
  const Eigen::MatrixXd h = -0.5 * p.omega * (a1.transpose() * a2 + a2.transpose() * a1) +
                            p.kappa * (n1 * n1 - n1 + n2 * n2 - n2) +
                            p.mu * std::cos(p.omega_drive * t) * (n1 - n2);
  Eigen::MatrixXd sector(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      sector(j, k) = h(j * d + (p.n - j), k * d + (p.n - k));
  return sector;
}

// Product of exact midpoint exponentials over [t0, t1].  Second-order in the
// step but every factor is exactly unitary, so the product is too.
inline dimerlab::Matrix product_propagator(const dimerlab::DimerParams& p, double t0, double t1,
                                           int steps) {
  const int d = p.n + 1;
  const double dt = (t1 - t0) / steps;
  dimerlab::Matrix u = dimerlab::Matrix::Identity(d, d);
  for (int s = 0; s < steps; ++s) {
    const double tm = t0 + (s + 0.5) * dt;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sector_hamiltonian(p, tm));
    dimerlab::Matrix step =
        (es.eigenvectors().cast<dimerlab::Complex>() *
         (dimerlab::Complex(0, -dt) * es.eigenvalues().cast<dimerlab::Complex>().array())
             .exp()
             .matrix()
             .asDiagonal() *
         es.eigenvectors().transpose().cast<dimerlab::Complex>());
    u = step * u;
  }
  return u;
}

// Closed-form spin-coherent amplitudes: sqrt(C(N,j)) cos^j(theta/2)
// sin^{N-j}(theta/2) e^{i(N-j)phi}, p = cos(theta).
inline dimerlab::Vector coherent_amplitudes(int n, double p, double phi) {
  const double theta = std::acos(p);
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  dimerlab::Vector amps(n + 1);
  double binom = 1.0;  // C(n, j), updated multiplicatively
  for (int j = 0; j <= n; ++j) {
    if (j > 0) binom *= double(n - j + 1) / double(j);
    const double mag = std::sqrt(binom) * std::pow(c, j) * std::pow(s, n - j);
    amps[j] = mag * std::exp(dimerlab::Complex(0.0, (n - j) * phi));
  }
  return amps;
}

// Squared overlap of two spin-coherent states: ((1 + cos gamma)/2)^N with
// gamma the Bloch-sphere angle between them.
inline double overlap_squared(int n, double p1, double phi1, double p2, double phi2) {
  const double s1 = std::sqrt(1.0 - p1 * p1), s2 = std::sqrt(1.0 - p2 * p2);
  const double cos_gamma = s1 * s2 * std::cos(phi1 - phi2) + p1 * p2;
  return std::pow(0.5 * (1.0 + cos_gamma), n);
}

}  // namespace oracle
