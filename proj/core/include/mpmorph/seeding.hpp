#pragma once

#include <cstdint>
#include <string>

#include "mpmorph/geometry.hpp"
#include "mpmorph/particles.hpp"
#include "mpmorph/sim_params.hpp"

namespace mpmorph {

struct SeedingOptions {
  double particles_per_cell = 8.0;
  /// Uniform jitter as a fraction of the sub-lattice spacing, in [0, 1].
  double jitter = 0.5;

  bool operator==(const SeedingOptions&) const = default;
};

/// Samples particles on a jittered sub-lattice with round(ppc^(1/Dim))
/// samples per axis and cell. m_p = rho V / N, V0_p = V / N, with V the
/// analytic volume when known and the sampled volume otherwise. Point-cloud
/// geometry uses the loaded points directly. Throws EmptyGeometry and
/// OutOfDomain.
template <int Dim>
ParticleSet<Dim> seed_particles(const GeometrySpec& geometry, const SimParams<Dim>& params, std::uint64_t seed,
                                const SeedingOptions& options = {});

/// Reads a point cloud (world units), optionally moving its centroid to the
/// domain centre and/or scaling it into 70% of the domain. Validates the
/// domain margin.
template <int Dim>
VecField<Dim> load_point_cloud(const std::string& path, const SimParams<Dim>& params, bool recenter = false,
                               bool fit = false, std::vector<double>* masses = nullptr);

}  // namespace mpmorph
