#pragma once

#include <Eigen/Dense>

#include "dimerlab/params.hpp"
#include "dimerlab/state.hpp"

namespace dimerlab {

// H(t)/hbar in the Fock basis |j, N-j> is real symmetric tridiagonal:
//   diagonal   kappa*[j(j-1) + (N-j)(N-j-1)] + mu*cos(omega_drive*t)*(2j - N)
//   hopping    -(Omega/2)*sqrt((j+1)(N-j)) between j and j+1.
// The drive phase is fixed by t = 0 sitting at the drive maximum: stroboscopic
// sections taken at t = 0 mod T then carry the island geometry the reference
// coordinates (seeds, island centers) are quoted in.

// out = H(t) psi.  O(N); out is resized if needed.  Throws StructuralError on
// a dimension mismatch.  psi and out must not alias.
void apply_hamiltonian(const DimerParams& p, double t, const Vector& psi, Vector& out);
Vector apply_hamiltonian(const DimerParams& p, double t, const Vector& psi);

// Diagonal of H(t) (interaction plus drive terms), length N+1.
void hamiltonian_diagonal(const DimerParams& p, double t, Eigen::VectorXd& diag);

// Off-diagonal hopping coefficients s_j = sqrt((j+1)(N-j)), length N.
// H_{j,j+1} = -(Omega/2) * s_j.
void hopping_coefficients(const DimerParams& p, Eigen::VectorXd& s);

// Ascending eigenvalues of the static part (drive removed).  Uses a
// tridiagonal solver, so it is cheap up to large N.
Eigen::VectorXd static_spectrum(const DimerParams& p);

// Site exchange |j, N-j> -> |N-j, j>; its own inverse.
void apply_site_swap(Vector& psi);
Vector site_swapped(const Vector& psi);

} // namespace dimerlab
