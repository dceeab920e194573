#pragma once

#include <span>

#include "mpmorph/grid.hpp"
#include "mpmorph/parallel.hpp"
#include "mpmorph/particles.hpp"
#include "mpmorph/sim_params.hpp"

namespace mpmorph {

/// Scratch state reused across timesteps.
template <int Dim>
struct StepWorkspace {
  Grid<Dim> grid;
  ParticleBinning<Dim> binning;
  MatField<Dim> affine;  // G_p of the MLS force discretization

  void prepare(const SimParams<Dim>& params) {
    if (grid.res != params.grid_res || grid.dx != params.dx) grid = Grid<Dim>(params.grid_res, params.dx);
  }
};

/// MLS affine term G_p = -(3 / dx^2) dt V0 P(A) A^T + m C with A = F + F_ctrl.
template <int Dim>
Mat<Dim> mls_affine(const ParticleSet<Dim>& particles, std::size_t p, const SimParams<Dim>& params);

/// Particle-to-grid transfer of mass and damped APIC momentum (includes the
/// per-particle stress evaluation). Throws OutOfDomain.
template <int Dim>
void p2g(const ParticleSet<Dim>& particles, const SimParams<Dim>& params, StepWorkspace<Dim>& ws);

template <int Dim>
Grid<Dim> p2g(const ParticleSet<Dim>& particles, const SimParams<Dim>& params);

/// Scatter of particle masses only, with the same kernel and ordering as p2g.
template <int Dim>
void rasterize_mass(const VecField<Dim>& x, std::span<const double> m, const SimParams<Dim>& params,
                    StepWorkspace<Dim>& ws);

/// True when a grid node lies in the sticky boundary layer.
template <int Dim>
bool is_sticky(const IVec<Dim>& node, const SimParams<Dim>& params);

/// v_i = (p_i + f_ext dt) / m_i on nodes above the mass floor; zero elsewhere
/// and on sticky boundary nodes.
template <int Dim>
void grid_update(Grid<Dim>& grid, const SimParams<Dim>& params);

/// Gathers v_p and C_p from grid velocities.
template <int Dim>
void g2p(const Grid<Dim>& grid, ParticleSet<Dim>& particles, const SimParams<Dim>& params);

/// Unit-step gate: true when |F_half - F|_F exceeds gamma.
template <int Dim>
inline bool gate_fires(const Mat<Dim>& F_half, const Mat<Dim>& F, const SimParams<Dim>& params) {
  return params.gate && (F_half - F).norm() > params.gamma;
}

/// Advects positions and applies the gated deformation-gradient update.
template <int Dim>
void p2_update(ParticleSet<Dim>& particles, const SimParams<Dim>& params);

/// One full timestep P1 -> P2G -> G -> G2P -> P2 using particles.F_ctrl.
template <int Dim>
void step_in_place(ParticleSet<Dim>& particles, const SimParams<Dim>& params, StepWorkspace<Dim>& ws);

/// Pure timestep: returns the successor of `particles` under `control`
/// (an empty span means zero control).
template <int Dim>
ParticleSet<Dim> step(const ParticleSet<Dim>& particles, std::span<const Mat<Dim>> control,
                      const SimParams<Dim>& params);

}  // namespace mpmorph
