#pragma once

#include "sgdlab/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace sgdlab {

/// A stochastic loss family f(x; k) with finite component support: component k
/// is drawn with probability component_weights()[k]. Derivatives are exact
/// closed forms supplied by each family.
///
/// Instances are immutable after construction and safe to share across
/// threads. The built-in families are smooth with bounded derivatives of every
/// order on bounded sets, which is what the diffusion-approximation estimates
/// assume; nothing here tries to verify such norms.
class LossProblem {
 public:
  virtual ~LossProblem() = default;

  virtual std::string family() const = 0;
  virtual Index dimension() const = 0;

  Index component_count() const { return weights_.size(); }
  const Vector& component_weights() const { return weights_; }

  virtual double value(const Vector& x, Index k) const = 0;
  virtual Vector gradient(const Vector& x, Index k) const = 0;
  virtual Matrix hessian(const Vector& x, Index k) const = 0;

 protected:
  /// Validates nonnegativity and that the weights sum to 1 within 1e-12.
  explicit LossProblem(Vector weights);

  void check_point(const Vector& x, Index k) const;

 private:
  Vector weights_;
};

using LossProblemPtr = std::shared_ptr<const LossProblem>;

/// f_k(x) = 1/2 (x - a_k)^T A_k (x - a_k).
class FiniteSumQuadratic final : public LossProblem {
 public:
  FiniteSumQuadratic(std::vector<Vector> centers, std::vector<Matrix> curvatures, Vector weights);

  std::string family() const override { return "finite_sum_quadratic"; }
  Index dimension() const override { return centers_.front().size(); }

  double value(const Vector& x, Index k) const override;
  Vector gradient(const Vector& x, Index k) const override;
  Matrix hessian(const Vector& x, Index k) const override;

  const std::vector<Vector>& centers() const { return centers_; }
  const std::vector<Matrix>& curvatures() const { return curvatures_; }

 private:
  std::vector<Vector> centers_;
  std::vector<Matrix> curvatures_;
};

/// One-dimensional tilted double well f_k(x) = (x^2 - 1)^2 / 4 - t_k x.
class DoubleWell1D final : public LossProblem {
 public:
  DoubleWell1D(Vector tilts, Vector weights);

  std::string family() const override { return "double_well"; }
  Index dimension() const override { return 1; }

  double value(const Vector& x, Index k) const override;
  Vector gradient(const Vector& x, Index k) const override;
  Matrix hessian(const Vector& x, Index k) const override;

  const Vector& tilts() const { return tilts_; }

 private:
  Vector tilts_;
};

/// Pseudo-Huber family f_k(x) = s sqrt(1 + |x - a_k|^2).
///
/// Every gradient has norm strictly below s, and for |x| >= R > A := max|a_k|
///   (x/|x|) . grad f_k(x) >= s (R - A) / sqrt(1 + (R + A)^2),
/// so the family is confining with closed-form constants.
class ConfiningFamily final : public LossProblem {
 public:
  ConfiningFamily(std::vector<Vector> centers, double scale, Vector weights);

  std::string family() const override { return "confining"; }
  Index dimension() const override { return centers_.front().size(); }

  double value(const Vector& x, Index k) const override;
  Vector gradient(const Vector& x, Index k) const override;
  Matrix hessian(const Vector& x, Index k) const override;

  const std::vector<Vector>& centers() const { return centers_; }
  double scale() const { return scale_; }

  /// sup over x and k of |grad f_k(x)|.
  double gradient_bound() const { return scale_; }
  /// max_k |a_k|.
  double center_radius() const;
  /// Radial lower bound delta(R) valid for |x| >= radius; requires radius > center_radius().
  double radial_margin(double radius) const;
  /// Largest admissible step 2 delta R / C^2 for confinement in B(0, R + C eta).
  double step_threshold(double radius) const;

 private:
  std::vector<Vector> centers_;
  double scale_;
};

/// sum_k w_k f(x, k).
double mean_loss(const LossProblem& problem, const Vector& x);
Vector mean_gradient(const LossProblem& problem, const Vector& x);
Matrix mean_hessian(const LossProblem& problem, const Vector& x);

/// var(grad f(x; k)) = sum_k w_k (g - g_k)(g - g_k)^T with g the mean gradient.
Matrix gradient_noise_covariance(const LossProblem& problem, const Vector& x);

/// Zero-mean data distribution with finite support for the online PCA chain.
/// Atoms are stored as the columns of atoms().
class DataModel {
 public:
  /// Validates probabilities (nonnegative, sum 1 within 1e-12) and zero mean
  /// sum_k p_k xi_k = 0 within 1e-12.
  DataModel(Matrix atoms, Vector probabilities);

  Index dimension() const { return atoms_.rows(); }
  Index atom_count() const { return atoms_.cols(); }
  const Matrix& atoms() const { return atoms_; }
  auto atom(Index k) const { return atoms_.col(k); }
  const Vector& probabilities() const { return probabilities_; }

  /// Sigma = sum_k p_k xi_k xi_k^T.
  const Matrix& covariance() const { return covariance_; }
  /// max_k |xi_k|.
  double bound() const { return bound_; }

 private:
  Matrix atoms_;
  Vector probabilities_;
  Matrix covariance_;
  double bound_ = 0.0;
};

using DataModelPtr = std::shared_ptr<const DataModel>;

/// Full-space gradient of f(w; xi_k) = 1/2 (w . xi_k)^2, i.e. xi_k (xi_k . w).
Vector pca_loss_gradient(const DataModel& model, const Vector& w, Index k);

/// M(w) = sum_k p_k (xi_k . w)^2 xi_k xi_k^T.
Matrix fourth_moment_contraction(const DataModel& model, const Vector& w);

/// Spherical gradient of f(w) = 1/2 w^T Sigma w, namely (I - w w^T) Sigma w.
Vector pca_spherical_gradient(const DataModel& model, const Vector& w);

/// M(w) - grad_S f grad_S f^T, the matrix whose square root drives the
/// order-2 sphere diffusion.
Matrix pca_noise_matrix(const DataModel& model, const Vector& w);

}  // namespace sgdlab
