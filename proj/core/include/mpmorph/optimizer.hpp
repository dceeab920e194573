#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "mpmorph/frame.hpp"
#include "mpmorph/loss.hpp"
#include "mpmorph/particles.hpp"
#include "mpmorph/sim_params.hpp"
#include "mpmorph/tape.hpp"

namespace mpmorph {

/// Which timesteps of a segment carry optimized controls.
struct ControlSchedule {
  int N = 10;        // final timestep of the segment
  int delta_n = 10;  // control period
  int i_max = 4;     // Adam iterations per layer and pass
  double kappa = 1e-6;

  /// {1, 1 + delta_n, 1 + 2 delta_n, ...} <= N.
  std::vector<int> layers() const;
  void validate() const;
};

struct AdamSettings {
  double alpha = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments of one control layer.
template <int Dim>
struct AdamState {
  MatField<Dim> m;
  MatField<Dim> v;
  int t = 0;
  AdamSettings settings;

  AdamState() = default;
  AdamState(std::size_t particles, const AdamSettings& s);

  /// Advances t, folds g into the moments and returns the bias-corrected
  /// descent direction -m_hat / (sqrt(v_hat) + eps).
  MatField<Dim> update(const MatField<Dim>& g);
};

struct MorphPlan {
  int passes = 3;
  int segment_len = 10;
  ControlSchedule schedule;
  LossKind loss_kind = LossKind::kLogMass;
  AdamSettings adam;
  int max_halvings = 20;
  /// Keep Adam moments of each layer from one pass to the next.
  bool persist_moments = false;

  void validate() const;
};

/// Bisection: halves alpha until loss_at(alpha) <= L0. Throws LineSearchFailed
/// once max_halvings halvings did not suffice. A throwing or non-finite
/// evaluation counts as an increase.
double compute_step_size(double L0, const std::function<double(double)>& loss_at, double alpha0,
                         int max_halvings = 20);

/// Vector form: loss evaluated along x + alpha dx.
double compute_step_size(double L0, const Eigen::VectorXd& x, const Eigen::VectorXd& dx,
                         const std::function<double(const Eigen::VectorXd&)>& loss, double alpha0,
                         int max_halvings = 20);

/// One row of the loss trace. `loss` is the loss with the controls in force
/// after the iteration; alpha is the accepted step (0 when none was taken).
struct TraceRecord {
  int segment = 0;
  int pass = 0;
  int layer = 0;  // global timestep index of the control layer
  int iter = 0;
  double loss = 0.0;
  double gradnorm = 0.0;
  double alpha = 0.0;
};

using TraceSink = std::function<void(const TraceRecord&)>;

struct PhaseTimes {
  double simulate = 0.0;
  double evaluate = 0.0;
  double backprop = 0.0;
  double line_search = 0.0;
  double io = 0.0;

  PhaseTimes& operator+=(const PhaseTimes& o);
};

struct LayerResult {
  double loss = 0.0;
  int updates = 0;
  int line_search_failures = 0;
};

/// Optimization context of one chained segment: start state, tape, controls.
template <int Dim>
class Segment {
 public:
  Segment(ParticleSet<Dim> start, int n_steps, const SimParams<Dim>& params, const Objective<Dim>& objective);

  int n_steps() const { return tape_.n_steps(); }
  const Tape<Dim>& tape() const { return tape_; }
  const SimParams<Dim>& params() const { return params_; }
  const Objective<Dim>& objective() const { return objective_; }

  ControlSequence<Dim>& controls() { return controls_; }
  const ControlSequence<Dim>& controls() const { return controls_; }

  /// Brings the tape in line with the controls from `first_step` on.
  void resimulate(int first_step);
  /// Loss of the recorded final state.
  double loss() const;

  /// Loss when steps layer..N run with `trial` as the layer's control.
  double trial_loss(int layer, const MatField<Dim>& trial);

  PhaseTimes& times() { return times_; }
  int global_offset = 0;  // timesteps preceding this segment
  int index = 0;

 private:
  SimParams<Dim> params_;
  const Objective<Dim>& objective_;
  Tape<Dim> tape_;
  ControlSequence<Dim> controls_;
  StepWorkspace<Dim> ws_;
  PhaseTimes times_;
};

/// Adam iterations on one control layer (SIMULATE, EVALUATE, BACKPROP,
/// DESCENT). Exits early once |g| < kappa, before any update.
template <int Dim>
LayerResult optimize_layer(Segment<Dim>& segment, int layer, AdamState<Dim>& adam, const MorphPlan& plan,
                           int pass, const TraceSink& sink = {});

/// One causal sweep over all control layers of the segment.
template <int Dim>
std::vector<LayerResult> run_pass(Segment<Dim>& segment, const MorphPlan& plan, int pass,
                                  std::map<int, AdamState<Dim>>& moments, const TraceSink& sink = {});

/// All passes of one segment; returns the final segment loss.
template <int Dim>
double optimize_segment(Segment<Dim>& segment, const MorphPlan& plan, const TraceSink& sink = {},
                        int* updates = nullptr);

template <int Dim>
using FrameSink = std::function<void(const FrameRecord<Dim>&)>;

template <int Dim>
struct ChainResult {
  ParticleSet<Dim> final_state;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> segment_losses;  // loss at the end of each segment
  int updates = 0;
  std::size_t peak_tape_states = 0;
  PhaseTimes times;
};

/// Splits total_frames into segments of plan.segment_len, optimizes each and
/// seeds the next one with its final state. Frames are handed to `frames`
/// before a segment's tape is released.
template <int Dim>
ChainResult<Dim> chain_segments(const ParticleSet<Dim>& source, const Objective<Dim>& objective,
                                const MorphPlan& plan, int total_frames, const SimParams<Dim>& params,
                                const FrameSink<Dim>& frames = {}, const TraceSink& trace = {});

}  // namespace mpmorph
