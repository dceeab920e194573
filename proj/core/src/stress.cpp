#include "mpmorph/stress.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "mpmorph/errors.hpp"

namespace mpmorph {

template <int Dim>
SignedSvd<Dim>::SignedSvd(const Mat<Dim>& F) {
  Eigen::JacobiSVD<Mat<Dim>> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  U = svd.matrixU();
  V = svd.matrixV();
  sigma = svd.singularValues();
  if (U.determinant() < 0.0) {
    U.col(Dim - 1) *= -1.0;
    sigma[Dim - 1] *= -1.0;
  }
  if (V.determinant() < 0.0) {
    V.col(Dim - 1) *= -1.0;
    sigma[Dim - 1] *= -1.0;
  }
}

template <int Dim>
Mat<Dim> polar_rotation(const Mat<Dim>& F) {
  return SignedSvd<Dim>(F).rotation();
}

namespace {

template <int Dim>
void check_determinant(double J, const SimParams<Dim>& params) {
  if (!(std::abs(J) >= params.det_floor))
    throw SingularDeformation("deformation gradient determinant " + std::to_string(J) +
                              " below floor");
}

}  // namespace

template <int Dim>
StressResult<Dim> pk1_stress(const Mat<Dim>& F, const SimParams<Dim>& params) {
  const double J = F.determinant();
  check_determinant(J, params);
  const Mat<Dim> R = polar_rotation<Dim>(F);
  // J F^-T is the cofactor matrix.
  const Mat<Dim> cofactor = J * F.inverse().transpose();
  StressResult<Dim> out;
  out.R = R;
  out.J = J;
  out.P = 2.0 * params.mu * (F - R) + params.lambda * (J - 1.0) * cofactor;
  return out;
}

template <int Dim>
Mat<Dim> pk1_stress_differential(const Mat<Dim>& F, const Mat<Dim>& dF,
                                 const SimParams<Dim>& params) {
  const double J = F.determinant();
  check_determinant(J, params);
  const SignedSvd<Dim> svd(F);

  // dR = U W V^T with W_ij = (M_ij - M_ji) / (s_i + s_j), M = U^T dF V.
  const Mat<Dim> M = svd.U.transpose() * dF * svd.V;
  Mat<Dim> W = Mat<Dim>::Zero();
  for (int i = 0; i < Dim; ++i) {
    for (int j = i + 1; j < Dim; ++j) {
      double denom = svd.sigma[i] + svd.sigma[j];
      if (std::abs(denom) < 1e-12) denom = denom < 0.0 ? -1e-12 : 1e-12;
      const double w = (M(i, j) - M(j, i)) / denom;
      W(i, j) = w;
      W(j, i) = -w;
    }
  }
  const Mat<Dim> dR = svd.U * W * svd.V.transpose();

  const Mat<Dim> F_invT = F.inverse().transpose();
  const Mat<Dim> cofactor = J * F_invT;
  const double dJ = (cofactor.array() * dF.array()).sum();
  // d(J F^-T) = dJ F^-T - J F^-T dF^T F^-T
  const Mat<Dim> dCofactor = dJ * F_invT - J * F_invT * dF.transpose() * F_invT;

  return 2.0 * params.mu * (dF - dR) + params.lambda * dJ * cofactor +
         params.lambda * (J - 1.0) * dCofactor;
}

template <int Dim>
double corotated_energy(const Mat<Dim>& F, const SimParams<Dim>& params) {
  const SignedSvd<Dim> svd(F);
  const double J = F.determinant();
  return params.mu * (svd.sigma.array() - 1.0).square().sum() +
         0.5 * params.lambda * (J - 1.0) * (J - 1.0);
}

#define MPMORPH_INSTANTIATE(D)                                                           \
  template struct SignedSvd<D>;                                                          \
  template Mat<D> polar_rotation<D>(const Mat<D>&);                                      \
  template StressResult<D> pk1_stress<D>(const Mat<D>&, const SimParams<D>&);            \
  template Mat<D> pk1_stress_differential<D>(const Mat<D>&, const Mat<D>&,               \
                                             const SimParams<D>&);                       \
  template double corotated_energy<D>(const Mat<D>&, const SimParams<D>&);

MPMORPH_INSTANTIATE(2)
MPMORPH_INSTANTIATE(3)
#undef MPMORPH_INSTANTIATE

}  // namespace mpmorph
