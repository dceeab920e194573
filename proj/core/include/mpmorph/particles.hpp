#pragma once

#include <cstddef>

#include "mpmorph/sim_params.hpp"
#include "mpmorph/types.hpp"

namespace mpmorph {

/// Structure-of-arrays particle state.
template <int Dim>
struct ParticleSet {
  VecField<Dim> x;
  VecField<Dim> v;
  std::vector<double> m;
  std::vector<double> V0;
  MatField<Dim> F;
  MatField<Dim> F_ctrl;
  MatField<Dim> C;

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }

  /// Rest state: v = 0, C = 0, F = I, F_ctrl = 0.
  static ParticleSet at_rest(VecField<Dim> positions, double mass, double volume);

  void resize(std::size_t n);

  /// Throws SizeMismatch / Error when array lengths or masses are invalid.
  void validate() const;

  bool operator==(const ParticleSet&) const = default;
};

/// Throws OutOfDomain if any particle's cubic kernel support leaves the grid.
template <int Dim>
void check_domain(const VecField<Dim>& x, const SimParams<Dim>& params);

template <int Dim>
double total_mass(const ParticleSet<Dim>& particles);

template <int Dim>
Vec<Dim> total_momentum(const ParticleSet<Dim>& particles);

}  // namespace mpmorph
