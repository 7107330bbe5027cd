#pragma once

#include <map>
#include <string>

#include "dimerlab/errors.hpp"

namespace dimerlab {

// Physical parameters of the driven two-site boson model, hbar = 1.
// All rates are inverse time; energies are reported in units of hbar*Omega
// unless stated otherwise.  Derived quantities are recomputed on demand and
// never cached, so a mutated parameter set stays consistent.
struct DimerParams {
  int    n = 2000;          // particle number N; basis |j, N-j>, dimension N+1
  double omega = 1.0;       // hopping rate Omega > 0 (sets the unit of time)
  double kappa = 0.92 / 2000.0; // on-site interaction kappa >= 0
  double mu = 0.4;          // drive amplitude mu >= 0
  double omega_drive = 1.9; // drive angular frequency omega > 0

  int dim() const { return n + 1; }

  double alpha() const { return n * kappa / omega; }       // interaction scale N*kappa/Omega
  double hbar_eff() const { return 2.0 / n; }              // effective Planck constant 2/N
  double period() const;                                   // T = 2*pi/omega_drive
  double dtau() const { return omega * period(); }         // drive period in scaled time tau = Omega*t

  // Throws StructuralError if any constraint (N >= 1, Omega > 0, omega > 0,
  // kappa >= 0, mu >= 0) is violated.
  void validate() const;
};

// Plain-text config: one "key = value" per line, '#' starts a comment.
// Recognized keys: n_particles, omega_hop, kappa, mu, omega_drive.
// Unknown keys are an error; missing keys keep their defaults.
DimerParams load_params(const std::string& path);
DimerParams parse_params(const std::string& text, const DimerParams& base = {});

// Applies "key=value" overrides (same keys as the config format) on top of p.
DimerParams apply_overrides(DimerParams p, const std::map<std::string, std::string>& kv);

std::string params_to_config(const DimerParams& p);

} // namespace dimerlab
