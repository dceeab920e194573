#pragma once

#include "mpmorph/errors.hpp"
#include "mpmorph/types.hpp"

namespace mpmorph {

/// Physical and numerical constants of one simulation.
///
/// Defaults follow the morphing setups: zeta = 0.5, dt = 1/120 s, 32 nodes
/// per axis, no external force.
template <int Dim>
struct SimParams {
  double mu = 40.0;        // Lame mu [Pa]
  double lambda = 40.0;    // Lame lambda [Pa]
  double rho = 75.0;       // density [kg/m^3]
  double zeta = 0.5;       // momentum damping
  double gamma = 0.955;    // deformation-gradient gate tolerance
  double dt = 0.00833;     // timestep [s]
  double dx = 1.0 / 32.0;  // grid spacing [m]
  Vec<Dim> f_ext = Vec<Dim>::Zero();
  int grid_res = 32;       // nodes per axis

  /// Optional continuous blend F <- (1 - b) F_new + b F_old applied after
  /// the gate. Zero disables it.
  double blend = 0.0;
  bool gate = true;

  double mass_floor_ratio = 1e-12;
  double det_floor = 1e-8;
  int sticky_cells = 2;

  /// Ordered reductions and scatters (bit-reproducible at any thread count).
  bool deterministic = true;

  static constexpr int dim = Dim;

  double domain_length() const { return grid_res * dx; }

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(dx > 0.0)) throw ConfigError("dx must be positive");
    if (mu < 0.0 || lambda < 0.0) throw ConfigError("Lame parameters must be non-negative");
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
    if (zeta < 0.0 || zeta * dt >= 1.0) throw ConfigError("zeta * dt must lie in [0, 1)");
    if (grid_res < 8) throw ConfigError("grid_res must be at least 8");
    if (blend < 0.0 || blend >= 1.0) throw ConfigError("blend must lie in [0, 1)");
  }
};

}  // namespace mpmorph
