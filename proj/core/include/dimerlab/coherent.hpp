#pragma once
// SU(2) coherent states over the Fock basis and Husimi phase-space projections.

#include <Eigen/Dense>

#include "dimerlab/meanfield.hpp"
#include "dimerlab/params.hpp"
#include "dimerlab/state.hpp"

namespace dimerlab {

struct HusimiGrid {
  Eigen::VectorXd p_axis;    // strictly ascending, spans [-1, 1]
  Eigen::VectorXd phi_axis;  // strictly ascending, spans (-pi, pi]
  Eigen::MatrixXd q;         // q(i, j) = Q at (p_axis[i], phi_axis[j])
};

// Amplitude on |j, N-j> is sqrt(C(N,j)) cos^j(theta/2) sin^{N-j}(theta/2)
// e^{i(N-j)phi} with p = cos(theta). Binomials accumulate in log space, so
// the construction stays finite and normalized up to N ~ 1e5.
ManyBodyState coherent_state(int n_particles, PhasePoint point);
ManyBodyState coherent_state(const DimerParams& params, PhasePoint point);

// Q = |<point|psi>|^2 for a normalized state; lies in [0, 1].
double husimi_value(const ManyBodyState& state, PhasePoint point);

// Q on the full lattice. Rows share the imbalance magnitudes, so each row
// costs one log-space setup plus a Horner sweep per phase column.
HusimiGrid husimi_grid(const ManyBodyState& state, int p_resolution = 201,
                       int phi_resolution = 201);

} // namespace dimerlab
