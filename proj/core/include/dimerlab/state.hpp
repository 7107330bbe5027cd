#pragma once

#include <Eigen/Dense>
#include <complex>

#include "dimerlab/errors.hpp"

namespace dimerlab {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

// State of N bosons on two sites in the Fock basis |j, N-j>, j = 0..N.
// amps[j] multiplies the basis vector with j particles on site 1.
struct ManyBodyState {
  Vector amps;
  double time = 0.0; // laboratory time carried along so the drive phase is unambiguous

  int dim() const { return static_cast<int>(amps.size()); }
  double norm() const { return amps.norm(); }

  // Enforces the constructor-level contract: nonzero length, unit norm.
  void require_normalized(double tol = 1e-10) const {
    if (amps.size() == 0) throw StructuralError("ManyBodyState: empty amplitude vector");
    if (std::abs(norm() - 1.0) > tol)
      throw StructuralError("ManyBodyState: amplitudes not normalized");
  }
};

// Basis state |j, N-j>.
ManyBodyState fock_state(int n_particles, int j);

} // namespace dimerlab
