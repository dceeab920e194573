#pragma once

#include <algorithm>
#include <cstddef>

#include "mpmorph/types.hpp"

namespace mpmorph {

/// Dense cubic lattice of `res` nodes per axis; node i sits at i * dx.
template <int Dim>
struct Grid {
  int res = 0;
  double dx = 0.0;
  /// Nodes lighter than this are empty (velocity zero). Set by P2G.
  double mass_floor = 0.0;
  std::vector<double> mass;
  VecField<Dim> momentum;
  VecField<Dim> velocity;

  Grid() = default;
  Grid(int res_, double dx_) : res(res_), dx(dx_) {
    const std::size_t n = node_count();
    mass.assign(n, 0.0);
    momentum.assign(n, Vec<Dim>::Zero());
    velocity.assign(n, Vec<Dim>::Zero());
  }

  std::size_t node_count() const {
    std::size_t n = 1;
    for (int a = 0; a < Dim; ++a) n *= static_cast<std::size_t>(res);
    return n;
  }

  std::size_t index(const IVec<Dim>& node) const {
    std::size_t idx = 0;
    for (int a = 0; a < Dim; ++a) idx = idx * static_cast<std::size_t>(res) + node[a];
    return idx;
  }

  IVec<Dim> node(std::size_t idx) const {
    IVec<Dim> n;
    for (int a = Dim - 1; a >= 0; --a) {
      n[a] = static_cast<int>(idx % static_cast<std::size_t>(res));
      idx /= static_cast<std::size_t>(res);
    }
    return n;
  }

  Vec<Dim> position(const IVec<Dim>& node) const { return node.template cast<double>() * dx; }

  void clear() {
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(momentum.begin(), momentum.end(), Vec<Dim>::Zero());
    std::fill(velocity.begin(), velocity.end(), Vec<Dim>::Zero());
  }
};

}  // namespace mpmorph
