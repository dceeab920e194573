#pragma once

#include <cstddef>

#include "mpmorph/parallel.hpp"
#include "mpmorph/sim_params.hpp"
#include "mpmorph/types.hpp"

namespace mpmorph::detail {

template <int Dim>
inline void add_atomic(Vec<Dim>& target, const Vec<Dim>& value) {
  for (int a = 0; a < Dim; ++a) {
#pragma omp atomic
    target[a] += value[a];
  }
}

inline void add_atomic(double& target, double value) {
#pragma omp atomic
  target += value;
}

/// Particle-to-node scatter. Deterministic mode goes through the coloured
/// binning; fast mode is a flat parallel loop and fn must accumulate
/// atomically when its second argument is true.
template <int Dim, class Fn>
void scatter(const VecField<Dim>& x, const SimParams<Dim>& params, ParticleBinning<Dim>& binning,
             Fn&& fn) {
  if (params.deterministic) {
    binning.build(x, params.dx, params.grid_res);
    binning.for_each_colored([&](std::size_t p) { fn(p, false); });
  } else {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < n; ++p) fn(static_cast<std::size_t>(p), true);
  }
}

}  // namespace mpmorph::detail
