#pragma once

#include "sgdlab/errors.hpp"

#include <Eigen/Dense>

#include <string>

namespace sgdlab {

/// Eigenvalues below -tolerance are reported as PSD violations; eigenvalues in
/// [-tolerance, 0) are rounding and get clamped to zero.
inline constexpr double kPsdClampTolerance = 1e-10;

/// Smallest eigenvalue of the symmetric part of `a`.
template <typename Derived>
typename Derived::Scalar min_symmetric_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  using Plain = typename Derived::PlainObject;
  const Plain sym = (a + a.transpose()) / typename Derived::Scalar(2);
  Eigen::SelfAdjointEigenSolver<Plain> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// Symmetric square root of a positive semi-definite matrix by
/// eigendecomposition: returns R symmetric PSD with R R = a.
template <typename Derived>
typename Derived::PlainObject psd_sqrt(const Eigen::MatrixBase<Derived>& a,
                                       typename Derived::Scalar tolerance = kPsdClampTolerance) {
  using Scalar = typename Derived::Scalar;
  using Plain = typename Derived::PlainObject;
  if (a.rows() != a.cols()) {
    throw InvalidArgument("linalg: psd_sqrt needs a square matrix");
  }
  const Plain sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Plain> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw PsdViolation("linalg: eigendecomposition failed");
  }
  const auto& lambda = eig.eigenvalues();
  if (lambda.size() > 0 && lambda.minCoeff() < -tolerance) {
    throw PsdViolation("linalg: matrix is not positive semi-definite (eigenvalue " +
                       std::to_string(lambda.minCoeff()) + ")");
  }
  const auto& basis = eig.eigenvectors();
  return basis * lambda.cwiseMax(Scalar(0)).cwiseSqrt().asDiagonal() * basis.transpose();
}

}  // namespace sgdlab
