#pragma once

#include <Eigen/Dense>

#include <functional>

namespace sgdlab {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Vector field on R^d (drifts, tangent fields).
using VectorField = std::function<Vector(const Vector&)>;
/// Matrix field on R^d (diffusion factors, covariances).
using MatrixField = std::function<Matrix(const Vector&)>;
/// Scalar test function on R^d.
using TestFunction = std::function<double(const Vector&)>;

}  // namespace sgdlab
