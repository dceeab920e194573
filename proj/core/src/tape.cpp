#include "mpmorph/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "mpmorph/detail/scatter.hpp"
#include "mpmorph/errors.hpp"
#include "mpmorph/kernel.hpp"
#include "mpmorph/log.hpp"
#include "mpmorph/stress.hpp"

namespace mpmorph {

namespace {

std::atomic<std::size_t> g_live_states{0};
std::atomic<std::size_t> g_peak_states{0};
std::atomic<double> g_adjoint_corruption{0.0};

void add_live(std::size_t n) {
  const std::size_t now = g_live_states.fetch_add(n) + n;
  std::size_t peak = g_peak_states.load();
  while (now > peak && !g_peak_states.compare_exchange_weak(peak, now)) {
  }
}

void remove_live(std::size_t n) { g_live_states.fetch_sub(n); }

template <int Dim>
void apply_control(ParticleSet<Dim>& particles, const ControlSequence<Dim>& controls, int step) {
  const std::size_t k = static_cast<std::size_t>(step - 1);
  if (k < controls.size() && !controls[k].empty()) {
    if (controls[k].size() != particles.size())
      throw SizeMismatch("control field size differs from particle count");
    particles.F_ctrl = controls[k];
  } else {
    std::fill(particles.F_ctrl.begin(), particles.F_ctrl.end(), Mat<Dim>::Zero());
  }
}

template <int Dim>
void checked_step(ParticleSet<Dim>& particles, const SimParams<Dim>& params, StepWorkspace<Dim>& ws,
                  int step) {
  try {
    step_in_place<Dim>(particles, params, ws);
  } catch (const SimulationError&) {
    throw;
  } catch (const Error& e) {
    throw SimulationError(e.what(), step);
  }
}

}  // namespace

void hooks::set_adjoint_corruption(double factor) { g_adjoint_corruption.store(factor); }
double hooks::adjoint_corruption() { return g_adjoint_corruption.load(); }

std::size_t TapeStats::live_states() { return g_live_states.load(); }
std::size_t TapeStats::peak_states() { return g_peak_states.load(); }
void TapeStats::reset_peak() { g_peak_states.store(g_live_states.load()); }

template <int Dim>
Tape<Dim>::Tape(ParticleSet<Dim> initial, const SimParams<Dim>& params, int n_steps)
    : params_(params), n_steps_(n_steps) {
  if (n_steps < 1) throw Error("a tape needs at least one step");
  initial.validate();
  states_.resize(static_cast<std::size_t>(n_steps) + 1);
  states_[0] = std::move(initial);
  grids_.resize(static_cast<std::size_t>(n_steps));
  add_live(states_.size());
  counted_ = true;
}

template <int Dim>
Tape<Dim>::~Tape() {
  if (counted_) remove_live(states_.size());
}

template <int Dim>
Tape<Dim>::Tape(Tape&& other) noexcept
    : params_(other.params_),
      n_steps_(other.n_steps_),
      states_(std::move(other.states_)),
      grids_(std::move(other.grids_)),
      ws_(std::move(other.ws_)),
      counted_(other.counted_) {
  other.counted_ = false;
}

template <int Dim>
void Tape<Dim>::record_from(int first_step, const ControlSequence<Dim>& controls) {
  if (first_step < 1 || first_step > n_steps_) throw Error("record_from: step out of range");
  for (int k = first_step; k <= n_steps_; ++k) {
    ParticleSet<Dim>& next = states_[static_cast<std::size_t>(k)];
    next = states_[static_cast<std::size_t>(k - 1)];
    apply_control<Dim>(next, controls, k);
    checked_step<Dim>(next, params_, ws_, k);
    Grid<Dim>& snapshot = grids_[static_cast<std::size_t>(k - 1)];
    snapshot.res = ws_.grid.res;
    snapshot.dx = ws_.grid.dx;
    snapshot.mass_floor = ws_.grid.mass_floor;
    snapshot.mass = ws_.grid.mass;
    snapshot.velocity = ws_.grid.velocity;
  }
}

template <int Dim>
Tape<Dim> record_segment(const ParticleSet<Dim>& initial, const ControlSequence<Dim>& controls,
                         int n_steps, const SimParams<Dim>& params) {
  Tape<Dim> tape(initial, params, n_steps);
  tape.record_from(1, controls);
  return tape;
}

template <int Dim>
ParticleSet<Dim> simulate(ParticleSet<Dim> state, const ControlSequence<Dim>& controls, int first_step,
                          int last_step, const SimParams<Dim>& params, StepWorkspace<Dim>& ws) {
  for (int k = first_step; k <= last_step; ++k) {
    apply_control<Dim>(state, controls, k);
    checked_step<Dim>(state, params, ws, k);
  }
  return state;
}

namespace {

/// Adjoint of one timestep. On entry the *_bar fields hold adjoints of the
/// output state; on exit they hold adjoints of the input state, and
/// ctrl_bar holds the adjoint of the step's control.
template <int Dim>
void backprop_step(const ParticleSet<Dim>& in, const ParticleSet<Dim>& out, const Grid<Dim>& grid,
                   const SimParams<Dim>& params, ParticleBinning<Dim>& binning, VecField<Dim>& x_bar,
                   VecField<Dim>& v_bar, MatField<Dim>& C_bar, MatField<Dim>& F_bar,
                   MatField<Dim>& ctrl_bar) {
  const std::size_t n = in.size();
  const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(n);
  const double dt = params.dt;
  const double c_scale = 3.0 / (params.dx * params.dx);
  const Mat<Dim> I = Mat<Dim>::Identity();

  // P2 adjoint: totals flowing into the G2P outputs v', C'.
  VecField<Dim> vout_bar(n);
  MatField<Dim> Cout_bar(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < np; ++k) {
    const std::size_t p = static_cast<std::size_t>(k);
    const Mat<Dim>& ctrl = out.F_ctrl[p];
    const Mat<Dim> A = in.F[p] + ctrl;
    const Mat<Dim> step_mat = I + dt * out.C[p];
    const Mat<Dim> F_half = step_mat * A;

    Mat<Dim> Fnew_bar = (1.0 - params.blend) * F_bar[p];
    Mat<Dim> Fold_bar = params.blend * F_bar[p];
    Mat<Dim> Fhalf_bar = Mat<Dim>::Zero();
    if (gate_fires<Dim>(F_half, in.F[p], params))
      Fold_bar += Fnew_bar;
    else
      Fhalf_bar = Fnew_bar;

    Cout_bar[p] = C_bar[p] + dt * Fhalf_bar * A.transpose();
    const Mat<Dim> A_bar = step_mat.transpose() * Fhalf_bar;
    F_bar[p] = Fold_bar + A_bar;
    ctrl_bar[p] = A_bar;
    vout_bar[p] = v_bar[p] + dt * x_bar[p];
    // x_bar[p] carries through x' = x + dt v'.
  }

  // G2P adjoint: scatter into nodal velocity adjoints, gather position terms.
  const std::size_t nodes = grid.node_count();
  VecField<Dim> gv_bar(nodes, Vec<Dim>::Zero());
  detail::scatter<Dim>(in.x, params, binning, [&](std::size_t p, bool atomic) {
    const KernelStencil<Dim> stencil(in.x[p], params.dx);
    const Vec<Dim>& vb = vout_bar[p];
    const Mat<Dim>& Cb = Cout_bar[p];
    stencil.for_each(grid, in.x[p], [&](std::size_t i, double w, const Vec<Dim>&, const Vec<Dim>& d) {
      const Vec<Dim> contrib = w * (vb + c_scale * Cb * d);
      if (atomic)
        detail::add_atomic<Dim>(gv_bar[i], contrib);
      else
        gv_bar[i] += contrib;
    });
  });
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < np; ++k) {
    const std::size_t p = static_cast<std::size_t>(k);
    const KernelStencil<Dim> stencil(in.x[p], params.dx);
    const Vec<Dim>& vb = vout_bar[p];
    const Mat<Dim>& Cb = Cout_bar[p];
    Vec<Dim> xb = Vec<Dim>::Zero();
    stencil.for_each(grid, in.x[p], [&](std::size_t i, double w, const Vec<Dim>& gw, const Vec<Dim>& d) {
      const Vec<Dim>& vi = grid.velocity[i];
      xb += gw * (vb.dot(vi) + c_scale * vi.dot(Cb * d));
      xb -= c_scale * w * (Cb.transpose() * vi);
    });
    x_bar[p] += xb;
  }

  // G adjoint (inactive and sticky nodes have zero velocity and pass nothing).
  VecField<Dim> gp_bar(nodes, Vec<Dim>::Zero());
  std::vector<double> gm_bar(nodes, 0.0);
  const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(nodes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < nn; ++k) {
    const std::size_t i = static_cast<std::size_t>(k);
    const double mi = grid.mass[i];
    if (mi <= grid.mass_floor || mi <= 0.0 || is_sticky<Dim>(grid.node(i), params)) continue;
    gp_bar[i] = gv_bar[i] / mi;
    gm_bar[i] = -gv_bar[i].dot(grid.velocity[i]) / mi;
  }

  // P2G + P1 adjoint, gathered per particle.
  const double damping = 1.0 - params.zeta * dt;
  const double stress_scale = -c_scale * dt;
  const double corruption = g_adjoint_corruption.load();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < np; ++k) {
    const std::size_t p = static_cast<std::size_t>(k);
    const Vec<Dim>& xp = in.x[p];
    const double mp = in.m[p];
    // The step's control lives in the output snapshot.
    const Mat<Dim> A = in.F[p] + out.F_ctrl[p];
    const StressResult<Dim> stress = pk1_stress<Dim>(A, params);
    const Mat<Dim> G = stress_scale * in.V0[p] * stress.P * A.transpose() + mp * in.C[p];
    const Vec<Dim> mv = mp * damping * in.v[p];
    const KernelStencil<Dim> stencil(xp, params.dx);

    Mat<Dim> G_bar = Mat<Dim>::Zero();
    Vec<Dim> v_acc = Vec<Dim>::Zero();
    Vec<Dim> xb = Vec<Dim>::Zero();
    stencil.for_each(grid, xp, [&](std::size_t i, double w, const Vec<Dim>& gw, const Vec<Dim>& d) {
      const Vec<Dim>& pb = gp_bar[i];
      G_bar += w * pb * d.transpose();
      v_acc += w * pb;
      xb += gw * (pb.dot(mv + G * d) + gm_bar[i] * mp);
      xb -= w * (G.transpose() * pb);
    });
    x_bar[p] += xb;
    v_bar[p] = mp * damping * v_acc;
    C_bar[p] = mp * G_bar;

    // G = s V0 P(A) A^T + m C.
    const Mat<Dim> tau_bar = stress_scale * in.V0[p] * G_bar;
    const Mat<Dim> P_bar = tau_bar * A;
    const Mat<Dim> A_bar = tau_bar.transpose() * stress.P +
                           (1.0 + corruption) * pk1_stress_differential<Dim>(A, P_bar, params);
    F_bar[p] += A_bar;
    ctrl_bar[p] += A_bar;
  }
}

}  // namespace

template <int Dim>
GradientBundle<Dim> backprop(const Tape<Dim>& tape, const VecField<Dim>& dL_dx_final, int layer) {
  if (layer < 1 || layer > tape.n_steps()) throw Error("backprop: layer out of range");
  const std::size_t n = tape.final_state().size();
  if (dL_dx_final.size() != n) throw SizeMismatch("loss gradient size differs from particle count");

  const SimParams<Dim>& params = tape.params();
  VecField<Dim> x_bar = dL_dx_final;
  VecField<Dim> v_bar(n, Vec<Dim>::Zero());
  MatField<Dim> C_bar(n, Mat<Dim>::Zero());
  MatField<Dim> F_bar(n, Mat<Dim>::Zero());
  MatField<Dim> ctrl_bar(n, Mat<Dim>::Zero());
  ParticleBinning<Dim> binning;

  for (int k = tape.n_steps(); k >= layer; --k)
    backprop_step<Dim>(tape.state(k - 1), tape.state(k), tape.grid(k), params, binning, x_bar, v_bar, C_bar,
                       F_bar, ctrl_bar);

  GradientBundle<Dim> out;
  out.dL_dFctrl = std::move(ctrl_bar);
  out.dL_dx_final = dL_dx_final;
  out.dL_dx_start = std::move(x_bar);
  out.dL_dv_start = std::move(v_bar);
  out.dL_dC_start = std::move(C_bar);
  out.dL_dF_start = std::move(F_bar);
  double norm2 = 0.0;
  bool finite = true;
  for (const Mat<Dim>& g : out.dL_dFctrl) {
    norm2 += g.squaredNorm();
    finite = finite && g.allFinite();
  }
  if (!finite) throw Error("backprop produced non-finite gradients");
  if (std::sqrt(norm2) < 1e-14) {
    out.vanishing = true;
    std::ostringstream msg;
    msg << "vanishing gradient at layer " << layer << " over " << tape.n_steps() - layer + 1 << " steps";
    log_warning(msg.str());
  }
  return out;
}

template <int Dim>
MatField<Dim> fd_gradient(const std::function<double(const MatField<Dim>&)>& loss,
                          const MatField<Dim>& controls, double h) {
  if (!(h > 0.0)) throw Error("finite-difference step must be positive");
  MatField<Dim> grad(controls.size(), Mat<Dim>::Zero());
  MatField<Dim> probe = controls;
  for (std::size_t p = 0; p < controls.size(); ++p) {
    for (int r = 0; r < Dim; ++r) {
      for (int c = 0; c < Dim; ++c) {
        const double orig = probe[p](r, c);
        probe[p](r, c) = orig + h;
        const double up = loss(probe);
        probe[p](r, c) = orig - h;
        const double down = loss(probe);
        probe[p](r, c) = orig;
        grad[p](r, c) = (up - down) / (2.0 * h);
      }
    }
  }
  return grad;
}

double fd_derivative(const std::function<double(double)>& f, double x, double h) {
  if (!(h > 0.0)) throw Error("finite-difference step must be positive");
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

#define MPMORPH_INSTANTIATE(D)                                                                       \
  template class Tape<D>;                                                                           \
  template Tape<D> record_segment<D>(const ParticleSet<D>&, const ControlSequence<D>&, int,          \
                                     const SimParams<D>&);                                          \
  template ParticleSet<D> simulate<D>(ParticleSet<D>, const ControlSequence<D>&, int, int,           \
                                      const SimParams<D>&, StepWorkspace<D>&);                       \
  template GradientBundle<D> backprop<D>(const Tape<D>&, const VecField<D>&, int);                  \
  template MatField<D> fd_gradient<D>(const std::function<double(const MatField<D>&)>&,              \
                                      const MatField<D>&, double);

MPMORPH_INSTANTIATE(2)
MPMORPH_INSTANTIATE(3)
#undef MPMORPH_INSTANTIATE

}  // namespace mpmorph
