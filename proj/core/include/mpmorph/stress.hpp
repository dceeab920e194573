#pragma once

#include "mpmorph/sim_params.hpp"
#include "mpmorph/types.hpp"

namespace mpmorph {

/// F = U diag(sigma) V^T with U, V proper rotations. When det F < 0 the last
/// singular value carries the sign.
template <int Dim>
struct SignedSvd {
  Mat<Dim> U;
  Vec<Dim> sigma;
  Mat<Dim> V;

  explicit SignedSvd(const Mat<Dim>& F);

  Mat<Dim> rotation() const { return U * V.transpose(); }
};

template <int Dim>
struct StressResult {
  Mat<Dim> P;  // first Piola-Kirchhoff stress
  Mat<Dim> R;  // rotation factor of the polar decomposition
  double J;
};

/// Rotation factor R of F = R S.
template <int Dim>
Mat<Dim> polar_rotation(const Mat<Dim>& F);

/// Fixed-corotated PK1 stress P = 2 mu (F - R) + lambda (J - 1) J F^-T.
/// Throws SingularDeformation when |det F| < params.det_floor.
template <int Dim>
StressResult<Dim> pk1_stress(const Mat<Dim>& F, const SimParams<Dim>& params);

/// Directional derivative dP[dF]. The energy Hessian is symmetric, so this is
/// also the adjoint map P_bar -> F_bar.
template <int Dim>
Mat<Dim> pk1_stress_differential(const Mat<Dim>& F, const Mat<Dim>& dF,
                                 const SimParams<Dim>& params);

/// Psi(F) = mu |F - R|^2 + lambda / 2 (J - 1)^2.
template <int Dim>
double corotated_energy(const Mat<Dim>& F, const SimParams<Dim>& params);

}  // namespace mpmorph
