#include "mpmorph/particles.hpp"

#include <string>

#include "mpmorph/errors.hpp"
#include "mpmorph/kernel.hpp"

namespace mpmorph {

template <int Dim>
ParticleSet<Dim> ParticleSet<Dim>::at_rest(VecField<Dim> positions, double mass, double volume) {
  ParticleSet out;
  const std::size_t n = positions.size();
  out.x = std::move(positions);
  out.v.assign(n, Vec<Dim>::Zero());
  out.m.assign(n, mass);
  out.V0.assign(n, volume);
  out.F.assign(n, Mat<Dim>::Identity());
  out.F_ctrl.assign(n, Mat<Dim>::Zero());
  out.C.assign(n, Mat<Dim>::Zero());
  return out;
}

template <int Dim>
void ParticleSet<Dim>::resize(std::size_t n) {
  x.resize(n, Vec<Dim>::Zero());
  v.resize(n, Vec<Dim>::Zero());
  m.resize(n, 0.0);
  V0.resize(n, 0.0);
  F.resize(n, Mat<Dim>::Identity());
  F_ctrl.resize(n, Mat<Dim>::Zero());
  C.resize(n, Mat<Dim>::Zero());
}

template <int Dim>
void ParticleSet<Dim>::validate() const {
  const std::size_t n = x.size();
  if (v.size() != n || m.size() != n || V0.size() != n || F.size() != n ||
      F_ctrl.size() != n || C.size() != n)
    throw SizeMismatch("particle arrays differ in length");
  for (std::size_t p = 0; p < n; ++p) {
    if (!(m[p] > 0.0) || !(V0[p] > 0.0))
      throw Error("particle " + std::to_string(p) + " has non-positive mass or volume");
  }
}

template <int Dim>
void check_domain(const VecField<Dim>& x, const SimParams<Dim>& params) {
  for (std::size_t p = 0; p < x.size(); ++p) {
    const KernelStencil<Dim> stencil(x[p], params.dx);
    if (!x[p].allFinite() || !stencil.inside(params.grid_res))
      throw OutOfDomain("particle " + std::to_string(p) + " kernel support leaves the grid");
  }
}

template <int Dim>
double total_mass(const ParticleSet<Dim>& particles) {
  double s = 0.0;
  for (double m : particles.m) s += m;
  return s;
}

template <int Dim>
Vec<Dim> total_momentum(const ParticleSet<Dim>& particles) {
  Vec<Dim> s = Vec<Dim>::Zero();
  for (std::size_t p = 0; p < particles.size(); ++p) s += particles.m[p] * particles.v[p];
  return s;
}

template struct ParticleSet<2>;
template struct ParticleSet<3>;
template void check_domain<2>(const VecField<2>&, const SimParams<2>&);
template void check_domain<3>(const VecField<3>&, const SimParams<3>&);
template double total_mass<2>(const ParticleSet<2>&);
template double total_mass<3>(const ParticleSet<3>&);
template Vec<2> total_momentum<2>(const ParticleSet<2>&);
template Vec<3> total_momentum<3>(const ParticleSet<3>&);

}  // namespace mpmorph
