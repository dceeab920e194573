#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "mpmorph/grid.hpp"
#include "mpmorph/types.hpp"

namespace mpmorph {

/// 1-D cubic B-spline N(t), support |t| < 2.
inline double bspline1(double t) {
  const double a = std::abs(t);
  if (a < 1.0) return 0.5 * a * a * a - a * a + 2.0 / 3.0;
  if (a < 2.0) {
    const double b = 2.0 - a;
    return b * b * b / 6.0;
  }
  return 0.0;
}

/// dN/dt.
inline double bspline1_deriv(double t) {
  const double a = std::abs(t);
  if (a < 1.0) return 1.5 * t * a - 2.0 * t;
  if (a < 2.0) {
    const double b = 2.0 - a;
    return (t > 0.0 ? -0.5 : 0.5) * b * b;
  }
  return 0.0;
}

/// Tensor-product weight for an offset given in units of dx.
template <int Dim>
double bspline_weight(const Vec<Dim>& offset) {
  double w = 1.0;
  for (int a = 0; a < Dim; ++a) w *= bspline1(offset[a]);
  return w;
}

/// The 4^Dim nodes covered by one particle together with the 1-D weights
/// and their derivatives with respect to the particle position.
template <int Dim>
struct KernelStencil {
  static constexpr int kWidth = 4;
  static constexpr int kNodes = Dim == 2 ? 16 : 64;

  IVec<Dim> base;
  std::array<std::array<double, kWidth>, Dim> w;
  std::array<std::array<double, kWidth>, Dim> dw;  // d w / d x_p along axis

  KernelStencil(const Vec<Dim>& x, double dx) {
    const double inv_dx = 1.0 / dx;
    for (int a = 0; a < Dim; ++a) {
      const double s = x[a] * inv_dx;
      base[a] = static_cast<int>(std::floor(s)) - 1;
      const double fx = s - base[a];
      for (int k = 0; k < kWidth; ++k) {
        const double t = fx - k;  // (x_p - x_i) / dx
        w[a][k] = bspline1(t);
        dw[a][k] = bspline1_deriv(t) * inv_dx;
      }
    }
  }

  bool inside(int res) const {
    for (int a = 0; a < Dim; ++a)
      if (base[a] < 0 || base[a] + kWidth - 1 > res - 1) return false;
    return true;
  }

  /// Calls fn(node_index, weight, weight_gradient, offset) for every covered
  /// node, where offset = x_i - x_p.
  template <class Fn>
  void for_each(const Grid<Dim>& grid, const Vec<Dim>& xp, Fn&& fn) const {
    const double dx = grid.dx;
    if constexpr (Dim == 2) {
      for (int i = 0; i < kWidth; ++i) {
        for (int j = 0; j < kWidth; ++j) {
          const IVec<2> node(base[0] + i, base[1] + j);
          const double weight = w[0][i] * w[1][j];
          const Vec<2> grad(dw[0][i] * w[1][j], w[0][i] * dw[1][j]);
          const Vec<2> d = node.template cast<double>() * dx - xp;
          fn(grid.index(node), weight, grad, d);
        }
      }
    } else {
      for (int i = 0; i < kWidth; ++i) {
        for (int j = 0; j < kWidth; ++j) {
          const double wij = w[0][i] * w[1][j];
          const double dwi_j = dw[0][i] * w[1][j];
          const double wi_dj = w[0][i] * dw[1][j];
          for (int k = 0; k < kWidth; ++k) {
            const IVec<3> node(base[0] + i, base[1] + j, base[2] + k);
            const double weight = wij * w[2][k];
            const Vec<3> grad(dwi_j * w[2][k], wi_dj * w[2][k], wij * dw[2][k]);
            const Vec<3> d = node.template cast<double>() * dx - xp;
            fn(grid.index(node), weight, grad, d);
          }
        }
      }
    }
  }
};

}  // namespace mpmorph
