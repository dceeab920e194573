#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mpmorph/grid.hpp"
#include "mpmorph/particles.hpp"
#include "mpmorph/sim_params.hpp"
#include "mpmorph/transfer.hpp"

namespace mpmorph {

/// Controls for steps 1..N of a segment; entry k - 1 drives step k. An empty
/// field means zero control for that step.
template <int Dim>
using ControlSequence = std::vector<MatField<Dim>>;

/// Live and peak number of particle snapshots held by all tapes.
struct TapeStats {
  static std::size_t live_states();
  static std::size_t peak_states();
  static void reset_peak();
};

/// Recorded forward network of one segment: N + 1 particle snapshots plus the
/// grid mass/velocity of every step.
template <int Dim>
class Tape {
 public:
  Tape(ParticleSet<Dim> initial, const SimParams<Dim>& params, int n_steps);
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&& other) noexcept;
  Tape& operator=(Tape&&) = delete;

  /// Re-simulates steps first_step..N from the stored state first_step - 1.
  /// Errors are rethrown as SimulationError naming the failing step.
  void record_from(int first_step, const ControlSequence<Dim>& controls);

  int n_steps() const { return n_steps_; }
  const SimParams<Dim>& params() const { return params_; }

  /// State after step k (k = 0 is the segment start).
  const ParticleSet<Dim>& state(int k) const { return states_[static_cast<std::size_t>(k)]; }
  const ParticleSet<Dim>& final_state() const { return states_.back(); }

  /// Grid of step k (1-based) after the G phase.
  const Grid<Dim>& grid(int k) const { return grids_[static_cast<std::size_t>(k - 1)]; }

 private:
  SimParams<Dim> params_;
  int n_steps_;
  std::vector<ParticleSet<Dim>> states_;
  std::vector<Grid<Dim>> grids_;
  StepWorkspace<Dim> ws_;
  bool counted_ = false;
};

template <int Dim>
Tape<Dim> record_segment(const ParticleSet<Dim>& initial, const ControlSequence<Dim>& controls,
                         int n_steps, const SimParams<Dim>& params);

/// Forward simulation of steps first_step..last_step without recording.
template <int Dim>
ParticleSet<Dim> simulate(ParticleSet<Dim> start, const ControlSequence<Dim>& controls, int first_step,
                          int last_step, const SimParams<Dim>& params, StepWorkspace<Dim>& ws);

template <int Dim>
struct GradientBundle {
  MatField<Dim> dL_dFctrl;    // at the requested control layer
  VecField<Dim> dL_dx_final;  // seed used for the reverse sweep
  bool vanishing = false;     // |dL/dF_ctrl| < 1e-14

  // Adjoints of the state entering step `layer`.
  VecField<Dim> dL_dx_start;
  VecField<Dim> dL_dv_start;
  MatField<Dim> dL_dC_start;
  MatField<Dim> dL_dF_start;
};

/// Reverse sweep T^N <- ... <- T^layer. Returns dL/dF_ctrl of step `layer`
/// given dL/dx of the final state. The gate is held fixed at its forward
/// branch.
template <int Dim>
GradientBundle<Dim> backprop(const Tape<Dim>& tape, const VecField<Dim>& dL_dx_final, int layer);

/// Central differences (L(X + h e_k) - L(X - h e_k)) / 2h for every entry.
template <int Dim>
MatField<Dim> fd_gradient(const std::function<double(const MatField<Dim>&)>& loss,
                          const MatField<Dim>& controls, double h = 1e-5);

namespace hooks {
/// Negative-control hook: scales the stress term of the reverse sweep by
/// (1 + factor). Zero restores the exact adjoint.
void set_adjoint_corruption(double factor);
double adjoint_corruption();
}  // namespace hooks

/// Scalar variant used by tests of the oracle itself.
double fd_derivative(const std::function<double(double)>& f, double x, double h = 1e-5);

}  // namespace mpmorph
