#include "mpmorph/loss.hpp"

#include <algorithm>
#include <cmath>

#include "mpmorph/errors.hpp"
#include "mpmorph/kernel.hpp"
#include "mpmorph/parallel.hpp"

namespace mpmorph {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kPosition: return "position";
    case LossKind::kMass: return "mass";
    case LossKind::kLogMass: return "logmass";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "position") return LossKind::kPosition;
  if (name == "mass") return LossKind::kMass;
  if (name == "logmass" || name == "log_mass") return LossKind::kLogMass;
  throw ConfigError("unknown loss kind '" + name + "'");
}

double accuracy_percent(double initial, double final_value) {
  if (initial <= 0.0) return final_value <= 0.0 ? 100.0 : 0.0;
  return 100.0 * (1.0 - final_value / initial);
}

template <int Dim>
double TargetMassField<Dim>::total() const {
  double s = 0.0;
  for (double m : m_star) s += m;
  return s;
}

template <int Dim>
TargetMassField<Dim> rasterize_target(const VecField<Dim>& x, std::span<const double> m,
                                      const SimParams<Dim>& params) {
  StepWorkspace<Dim> ws;
  rasterize_mass<Dim>(x, m, params, ws);
  TargetMassField<Dim> out;
  out.res = params.grid_res;
  out.dx = params.dx;
  out.m_star = std::move(ws.grid.mass);
  return out;
}

template <int Dim>
LossReport position_loss(const VecField<Dim>& x, const VecField<Dim>& x_star, VecField<Dim>* grad) {
  if (x.size() != x_star.size()) throw SizeMismatch("position loss needs equally sized point clouds");
  LossReport r;
  r.kind = LossKind::kPosition;
  r.value = deterministic_sum(x.size(), [&](std::size_t p) { return 0.5 * (x[p] - x_star[p]).squaredNorm(); });
  if (grad) {
    grad->resize(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) (*grad)[p] = x[p] - x_star[p];
  }
  return r;
}

LossReport mass_loss(std::span<const double> m, std::span<const double> m_star, std::vector<double>* grad) {
  if (m.size() != m_star.size()) throw LatticeMismatch("mass fields live on different lattices");
  LossReport r;
  r.kind = LossKind::kMass;
  r.value = deterministic_sum(m.size(), [&](std::size_t i) {
    const double d = m[i] - m_star[i];
    return 0.5 * d * d;
  });
  if (grad) {
    grad->resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) (*grad)[i] = m[i] - m_star[i];
  }
  return r;
}

LossReport log_mass_loss(std::span<const double> m, std::span<const double> m_star, std::vector<double>* grad) {
  if (m.size() != m_star.size()) throw LatticeMismatch("mass fields live on different lattices");
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] < 0.0 || m_star[i] < 0.0) throw NegativeMass("negative nodal mass at node " + std::to_string(i));
  LossReport r;
  r.kind = LossKind::kLogMass;
  r.value = deterministic_sum(m.size(), [&](std::size_t i) {
    const double d = std::log1p(m[i]) - std::log1p(m_star[i]);
    return 0.5 * d * d;
  });
  if (grad) {
    grad->resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
      (*grad)[i] = (std::log1p(m[i]) - std::log1p(m_star[i])) / (m[i] + 1.0);
  }
  return r;
}

template <int Dim>
Objective<Dim> Objective<Dim>::position(VecField<Dim> targets) {
  Objective o;
  o.kind_ = LossKind::kPosition;
  o.targets_ = std::move(targets);
  return o;
}

template <int Dim>
Objective<Dim> Objective<Dim>::mass(TargetMassField<Dim> target, double mass_scale) {
  Objective o;
  o.kind_ = LossKind::kMass;
  o.field_ = std::move(target);
  o.mass_scale_ = mass_scale;
  return o;
}

template <int Dim>
Objective<Dim> Objective<Dim>::log_mass(TargetMassField<Dim> target, double mass_scale) {
  Objective o = mass(std::move(target), mass_scale);
  o.kind_ = LossKind::kLogMass;
  return o;
}

template <int Dim>
Objective<Dim> Objective<Dim>::make(LossKind kind, const VecField<Dim>& target_x, std::span<const double> target_m,
                                    const SimParams<Dim>& params, double mass_scale) {
  if (kind == LossKind::kPosition) return position(target_x);
  auto field = rasterize_target<Dim>(target_x, target_m, params);
  return kind == LossKind::kMass ? mass(std::move(field), mass_scale) : log_mass(std::move(field), mass_scale);
}

template <int Dim>
double Objective<Dim>::nodal(const ParticleSet<Dim>& particles, const SimParams<Dim>& params,
                             StepWorkspace<Dim>& ws, std::vector<double>* grad) const {
  if (field_.res != params.grid_res || field_.dx != params.dx)
    throw LatticeMismatch("target mass field was rasterized on a different lattice");
  rasterize_mass<Dim>(particles.x, particles.m, params, ws);
  std::vector<double> m = ws.grid.mass;
  std::vector<double> m_star = field_.m_star;
  if (mass_scale_ != 1.0) {
    for (double& v : m) v *= mass_scale_;
    for (double& v : m_star) v *= mass_scale_;
  }
  const LossReport r = kind_ == LossKind::kMass ? mass_loss(m, m_star, grad) : log_mass_loss(m, m_star, grad);
  if (grad && mass_scale_ != 1.0)
    for (double& g : *grad) g *= mass_scale_;
  return r.value;
}

template <int Dim>
double Objective<Dim>::value(const ParticleSet<Dim>& particles, const SimParams<Dim>& params) const {
  if (kind_ == LossKind::kPosition) return position_loss<Dim>(particles.x, targets_).value;
  StepWorkspace<Dim> ws;
  return nodal(particles, params, ws, nullptr);
}

template <int Dim>
double Objective<Dim>::gradient(const ParticleSet<Dim>& particles, const SimParams<Dim>& params,
                                VecField<Dim>& dL_dx) const {
  if (kind_ == LossKind::kPosition) return position_loss<Dim>(particles.x, targets_, &dL_dx).value;

  StepWorkspace<Dim> ws;
  std::vector<double> node_grad;
  const double value = nodal(particles, params, ws, &node_grad);
  const std::size_t n = particles.size();
  dL_dx.assign(n, Vec<Dim>::Zero());
  const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < np; ++k) {
    const std::size_t p = static_cast<std::size_t>(k);
    const KernelStencil<Dim> stencil(particles.x[p], params.dx);
    Vec<Dim> g = Vec<Dim>::Zero();
    stencil.for_each(ws.grid, particles.x[p], [&](std::size_t i, double, const Vec<Dim>& gw, const Vec<Dim>&) {
      g += node_grad[i] * gw;
    });
    dL_dx[p] = particles.m[p] * g;
  }
  return value;
}

template <int Dim>
std::vector<double> Objective<Dim>::particle_channel(const ParticleSet<Dim>& particles,
                                                     const SimParams<Dim>& params) const {
  const std::size_t n = particles.size();
  std::vector<double> channel(n, 0.0);
  if (kind_ == LossKind::kPosition) {
    for (std::size_t p = 0; p < n; ++p) channel[p] = 0.5 * (particles.x[p] - targets_[p]).squaredNorm();
  } else {
    StepWorkspace<Dim> ws;
    nodal(particles, params, ws, nullptr);
    std::vector<double> node_loss(ws.grid.mass.size());
    for (std::size_t i = 0; i < node_loss.size(); ++i) {
      const double m = mass_scale_ * ws.grid.mass[i];
      const double ms = mass_scale_ * field_.m_star[i];
      const double d = kind_ == LossKind::kMass ? m - ms : std::log1p(m) - std::log1p(ms);
      node_loss[i] = 0.5 * d * d;
    }
    for (std::size_t p = 0; p < n; ++p) {
      const KernelStencil<Dim> stencil(particles.x[p], params.dx);
      double s = 0.0;
      stencil.for_each(ws.grid, particles.x[p],
                       [&](std::size_t i, double w, const Vec<Dim>&, const Vec<Dim>&) { s += w * node_loss[i]; });
      channel[p] = s;
    }
  }
  const double mx = channel.empty() ? 0.0 : *std::max_element(channel.begin(), channel.end());
  if (mx > 0.0)
    for (double& c : channel) c /= mx;
  return channel;
}

#define MPMORPH_INSTANTIATE(D)                                                                         \
  template struct TargetMassField<D>;                                                                 \
  template TargetMassField<D> rasterize_target<D>(const VecField<D>&, std::span<const double>,         \
                                                  const SimParams<D>&);                               \
  template LossReport position_loss<D>(const VecField<D>&, const VecField<D>&, VecField<D>*);          \
  template class Objective<D>;

MPMORPH_INSTANTIATE(2)
MPMORPH_INSTANTIATE(3)
#undef MPMORPH_INSTANTIATE

}  // namespace mpmorph
