#pragma once

#include <vector>

#include <Eigen/Core>

namespace mpmorph {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

template <int Dim>
using IVec = Eigen::Matrix<int, Dim, 1>;

/// Per-particle matrix field (deformation gradients, controls, adjoints).
template <int Dim>
using MatField = std::vector<Mat<Dim>>;

template <int Dim>
using VecField = std::vector<Vec<Dim>>;

}  // namespace mpmorph
