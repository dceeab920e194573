#include "mpmorph/seeding.hpp"

#include <cmath>
#include <random>

#include "mpmorph/errors.hpp"
#include "mpmorph/ply.hpp"

namespace mpmorph {

namespace {

constexpr double kFitFraction = 0.7;

int samples_per_axis(double ppc, int dim) {
  return std::max(1, static_cast<int>(std::lround(std::pow(ppc, 1.0 / dim))));
}

}  // namespace

template <int Dim>
VecField<Dim> load_point_cloud(const std::string& path, const SimParams<Dim>& params, bool recenter, bool fit,
                               std::vector<double>* masses) {
  const PointCloud cloud = read_point_cloud(path);
  VecField<Dim> x(cloud.positions.size());
  for (std::size_t p = 0; p < x.size(); ++p) x[p] = cloud.positions[p].template head<Dim>();
  if (masses) *masses = cloud.masses;
  if (x.empty()) return x;

  const double L = params.domain_length();
  const Vec<Dim> domain_center = Vec<Dim>::Constant(0.5 * L);
  if (fit) {
    Vec<Dim> lo = x[0], hi = x[0];
    for (const auto& p : x) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double extent = (hi - lo).maxCoeff();
    const double scale = extent > 0.0 ? kFitFraction * L / extent : 1.0;
    const Vec<Dim> mid = 0.5 * (lo + hi);
    for (auto& p : x) p = domain_center + scale * (p - mid);
  }
  if (recenter) {
    Vec<Dim> centroid = Vec<Dim>::Zero();
    for (const auto& p : x) centroid += p;
    centroid /= static_cast<double>(x.size());
    for (auto& p : x) p += domain_center - centroid;
  }
  check_domain<Dim>(x, params);
  return x;
}

template <int Dim>
ParticleSet<Dim> seed_particles(const GeometrySpec& geometry, const SimParams<Dim>& params, std::uint64_t seed,
                                const SeedingOptions& options) {
  const double L = params.domain_length();
  const double cell_volume = std::pow(params.dx, Dim);

  if (geometry.kind == GeometrySpec::Kind::kPointCloud) {
    VecField<Dim> x = load_point_cloud<Dim>(geometry.path, params, geometry.recenter, geometry.fit);
    if (x.empty()) throw EmptyGeometry("point cloud '" + geometry.path + "' has no points");
    const double volume = x.size() * cell_volume / options.particles_per_cell;
    const double per = volume / static_cast<double>(x.size());
    return ParticleSet<Dim>::at_rest(std::move(x), params.rho * per, per);
  }

  const int k = samples_per_axis(options.particles_per_cell, Dim);
  const double h = params.dx / k;
  Vec<Dim> lo_u, hi_u;
  bounds<Dim>(geometry, lo_u, hi_u);
  IVec<Dim> lo, hi;
  for (int a = 0; a < Dim; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::floor(lo_u[a] * L / h)) - 1);
    hi[a] = std::min(params.grid_res * k, static_cast<int>(std::ceil(hi_u[a] * L / h)) + 1);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  VecField<Dim> x;
  IVec<Dim> idx = lo;
  while (true) {
    Vec<Dim> pos;
    for (int a = 0; a < Dim; ++a) pos[a] = (idx[a] + 0.5 + options.jitter * uniform(rng)) * h;
    if (contains<Dim>(geometry, Vec<Dim>(pos / L))) x.push_back(pos);
    int a = Dim - 1;
    while (a >= 0 && ++idx[a] >= hi[a]) {
      idx[a] = lo[a];
      --a;
    }
    if (a < 0) break;
  }
  if (x.empty()) throw EmptyGeometry("geometry produced no particles");
  check_domain<Dim>(x, params);

  const double analytic = analytic_volume<Dim>(geometry);
  const double volume = analytic > 0.0 ? analytic * std::pow(L, Dim) : x.size() * std::pow(h, Dim);
  const double per = volume / static_cast<double>(x.size());
  return ParticleSet<Dim>::at_rest(std::move(x), params.rho * per, per);
}

#define MPMORPH_INSTANTIATE(D)                                                                             \
  template ParticleSet<D> seed_particles<D>(const GeometrySpec&, const SimParams<D>&, std::uint64_t,        \
                                            const SeedingOptions&);                                        \
  template VecField<D> load_point_cloud<D>(const std::string&, const SimParams<D>&, bool, bool,             \
                                           std::vector<double>*);

MPMORPH_INSTANTIATE(2)
MPMORPH_INSTANTIATE(3)
#undef MPMORPH_INSTANTIATE

}  // namespace mpmorph
