#include "mpmorph/transfer.hpp"

#include <algorithm>
#include <string>

#include "mpmorph/detail/scatter.hpp"
#include "mpmorph/errors.hpp"
#include "mpmorph/kernel.hpp"
#include "mpmorph/stress.hpp"

namespace mpmorph {

template <int Dim>
Mat<Dim> mls_affine(const ParticleSet<Dim>& particles, std::size_t p, const SimParams<Dim>& params) {
  const Mat<Dim> A = particles.F[p] + particles.F_ctrl[p];
  const StressResult<Dim> s = pk1_stress<Dim>(A, params);
  const double scale = -3.0 / (params.dx * params.dx) * params.dt * particles.V0[p];
  return scale * s.P * A.transpose() + particles.m[p] * particles.C[p];
}

namespace {

using detail::add_atomic;

double max_mass(std::span<const double> m) {
  double mx = 0.0;
  for (double v : m) mx = std::max(mx, v);
  return mx;
}

}  // namespace

template <int Dim>
void p2g(const ParticleSet<Dim>& particles, const SimParams<Dim>& params, StepWorkspace<Dim>& ws) {
  check_domain<Dim>(particles.x, params);
  ws.prepare(params);
  ws.grid.clear();
  const std::size_t n = particles.size();
  ws.affine.resize(n);

  // Exceptions cannot leave an OpenMP region; collect and rethrow.
  const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(n);
  bool failed = false;
  std::string message;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < np; ++p) {
    try {
      ws.affine[static_cast<std::size_t>(p)] = mls_affine<Dim>(particles, static_cast<std::size_t>(p), params);
    } catch (const SingularDeformation& e) {
#pragma omp critical(mpmorph_p1_error)
      {
        if (!failed) message = "particle " + std::to_string(p) + ": " + e.what();
        failed = true;
      }
    }
  }
  if (failed) throw SingularDeformation(message);

  const double damping = 1.0 - params.zeta * params.dt;
  Grid<Dim>& grid = ws.grid;
  grid.mass_floor = params.mass_floor_ratio * max_mass(particles.m);
  detail::scatter<Dim>(particles.x, params, ws.binning, [&](std::size_t p, bool atomic) {
    const Vec<Dim>& xp = particles.x[p];
    const double mp = particles.m[p];
    const Vec<Dim> mv = mp * damping * particles.v[p];
    const Mat<Dim>& G = ws.affine[p];
    const KernelStencil<Dim> stencil(xp, params.dx);
    stencil.for_each(grid, xp, [&](std::size_t i, double w, const Vec<Dim>&, const Vec<Dim>& d) {
      const Vec<Dim> contrib = w * (mv + G * d);
      if (atomic) {
        add_atomic(grid.mass[i], w * mp);
        add_atomic<Dim>(grid.momentum[i], contrib);
      } else {
        grid.mass[i] += w * mp;
        grid.momentum[i] += contrib;
      }
    });
  });
}

template <int Dim>
Grid<Dim> p2g(const ParticleSet<Dim>& particles, const SimParams<Dim>& params) {
  StepWorkspace<Dim> ws;
  p2g<Dim>(particles, params, ws);
  return std::move(ws.grid);
}

template <int Dim>
void rasterize_mass(const VecField<Dim>& x, std::span<const double> m, const SimParams<Dim>& params,
                    StepWorkspace<Dim>& ws) {
  if (x.size() != m.size()) throw SizeMismatch("positions and masses differ in length");
  check_domain<Dim>(x, params);
  ws.prepare(params);
  ws.grid.clear();
  Grid<Dim>& grid = ws.grid;
  grid.mass_floor = params.mass_floor_ratio * max_mass(m);
  detail::scatter<Dim>(x, params, ws.binning, [&](std::size_t p, bool atomic) {
    const KernelStencil<Dim> stencil(x[p], params.dx);
    stencil.for_each(grid, x[p], [&](std::size_t i, double w, const Vec<Dim>&, const Vec<Dim>&) {
      if (atomic)
        add_atomic(grid.mass[i], w * m[p]);
      else
        grid.mass[i] += w * m[p];
    });
  });
}

template <int Dim>
bool is_sticky(const IVec<Dim>& node, const SimParams<Dim>& params) {
  for (int a = 0; a < Dim; ++a)
    if (node[a] < params.sticky_cells || node[a] > params.grid_res - 1 - params.sticky_cells) return true;
  return false;
}

template <int Dim>
void grid_update(Grid<Dim>& grid, const SimParams<Dim>& params) {
  const Vec<Dim> impulse = params.f_ext * params.dt;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(grid.node_count());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const std::size_t i = static_cast<std::size_t>(k);
    const double mi = grid.mass[i];
    if (mi <= grid.mass_floor || mi <= 0.0 || is_sticky<Dim>(grid.node(i), params)) {
      grid.velocity[i].setZero();
    } else {
      grid.velocity[i] = (grid.momentum[i] + impulse) / mi;
    }
  }
}

template <int Dim>
void g2p(const Grid<Dim>& grid, ParticleSet<Dim>& particles, const SimParams<Dim>& params) {
  check_domain<Dim>(particles.x, params);
  const double c_scale = 3.0 / (params.dx * params.dx);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(particles.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const std::size_t p = static_cast<std::size_t>(k);
    const Vec<Dim>& xp = particles.x[p];
    Vec<Dim> v = Vec<Dim>::Zero();
    Mat<Dim> B = Mat<Dim>::Zero();
    const KernelStencil<Dim> stencil(xp, params.dx);
    stencil.for_each(grid, xp, [&](std::size_t i, double w, const Vec<Dim>&, const Vec<Dim>& d) {
      const Vec<Dim> wv = w * grid.velocity[i];
      v += wv;
      B += wv * d.transpose();
    });
    particles.v[p] = v;
    particles.C[p] = c_scale * B;
  }
}

template <int Dim>
void p2_update(ParticleSet<Dim>& particles, const SimParams<Dim>& params) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(particles.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const std::size_t p = static_cast<std::size_t>(k);
    particles.x[p] += params.dt * particles.v[p];
    const Mat<Dim> F_old = particles.F[p];
    const Mat<Dim> F_half =
        (Mat<Dim>::Identity() + params.dt * particles.C[p]) * (F_old + particles.F_ctrl[p]);
    Mat<Dim> F_new = gate_fires<Dim>(F_half, F_old, params) ? F_old : F_half;
    if (params.blend > 0.0) F_new = (1.0 - params.blend) * F_new + params.blend * F_old;
    particles.F[p] = F_new;
  }
}

template <int Dim>
void step_in_place(ParticleSet<Dim>& particles, const SimParams<Dim>& params, StepWorkspace<Dim>& ws) {
  p2g<Dim>(particles, params, ws);
  grid_update<Dim>(ws.grid, params);
  g2p<Dim>(ws.grid, particles, params);
  p2_update<Dim>(particles, params);
}

template <int Dim>
ParticleSet<Dim> step(const ParticleSet<Dim>& particles, std::span<const Mat<Dim>> control,
                      const SimParams<Dim>& params) {
  ParticleSet<Dim> next = particles;
  if (control.empty()) {
    std::fill(next.F_ctrl.begin(), next.F_ctrl.end(), Mat<Dim>::Zero());
  } else {
    if (control.size() != particles.size()) throw SizeMismatch("control count differs from particle count");
    next.F_ctrl.assign(control.begin(), control.end());
  }
  StepWorkspace<Dim> ws;
  step_in_place<Dim>(next, params, ws);
  return next;
}

#define MPMORPH_INSTANTIATE(D)                                                                    \
  template Mat<D> mls_affine<D>(const ParticleSet<D>&, std::size_t, const SimParams<D>&);         \
  template void p2g<D>(const ParticleSet<D>&, const SimParams<D>&, StepWorkspace<D>&);            \
  template Grid<D> p2g<D>(const ParticleSet<D>&, const SimParams<D>&);                            \
  template void rasterize_mass<D>(const VecField<D>&, std::span<const double>, const SimParams<D>&, \
                                  StepWorkspace<D>&);                                             \
  template bool is_sticky<D>(const IVec<D>&, const SimParams<D>&);                                \
  template void grid_update<D>(Grid<D>&, const SimParams<D>&);                                    \
  template void g2p<D>(const Grid<D>&, ParticleSet<D>&, const SimParams<D>&);                     \
  template void p2_update<D>(ParticleSet<D>&, const SimParams<D>&);                               \
  template void step_in_place<D>(ParticleSet<D>&, const SimParams<D>&, StepWorkspace<D>&);        \
  template ParticleSet<D> step<D>(const ParticleSet<D>&, std::span<const Mat<D>>, const SimParams<D>&);

MPMORPH_INSTANTIATE(2)
MPMORPH_INSTANTIATE(3)
#undef MPMORPH_INSTANTIATE

}  // namespace mpmorph
