#include "sgdlab/problems.hpp"

#include "sgdlab/errors.hpp"

#include <cmath>
#include <string>

namespace sgdlab {
namespace {

constexpr double kWeightTolerance = 1e-12;
constexpr double kUnitTolerance = 1e-12;

void check_weights(const Vector& weights, const char* module) {
  if (weights.size() == 0) {
    throw InvalidArgument(std::string(module) + ": at least one component is required");
  }
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw InvalidArgument(std::string(module) + ": weights must be finite and nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > kWeightTolerance) {
    throw InvalidArgument(std::string(module) + ": weights must sum to 1 (got " +
                          std::to_string(weights.sum()) + ")");
  }
}

void check_unit(const Vector& w, const char* op) {
  if (std::abs(w.norm() - 1.0) > kUnitTolerance) {
    throw InvalidArgument(std::string("problems: ") + op + " needs a unit vector (|w| = " +
                          std::to_string(w.norm()) + ")");
  }
}

template <typename Vec>
void check_same_dimension(const std::vector<Vec>& items, const char* what) {
  if (items.empty()) {
    throw InvalidArgument(std::string("problems: no ") + what + " given");
  }
  for (const auto& item : items) {
    if (item.size() != items.front().size() || item.size() == 0) {
      throw InvalidArgument(std::string("problems: ") + what + " have inconsistent dimensions");
    }
  }
}

}  // namespace

LossProblem::LossProblem(Vector weights) : weights_(std::move(weights)) {
  check_weights(weights_, "problems");
}

void LossProblem::check_point(const Vector& x, Index k) const {
  if (x.size() != dimension()) {
    throw InvalidArgument("problems: point has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(dimension()));
  }
  if (k < 0 || k >= component_count()) {
    throw InvalidArgument("problems: component index " + std::to_string(k) + " out of range");
  }
}

// ---------------------------------------------------------------------------

FiniteSumQuadratic::FiniteSumQuadratic(std::vector<Vector> centers, std::vector<Matrix> curvatures,
                                       Vector weights)
    : LossProblem(std::move(weights)),
      centers_(std::move(centers)),
      curvatures_(std::move(curvatures)) {
  check_same_dimension(centers_, "centers");
  if (static_cast<Index>(centers_.size()) != component_count() ||
      curvatures_.size() != centers_.size()) {
    throw InvalidArgument("problems: centers, curvatures and weights must have equal length");
  }
  const Index d = centers_.front().size();
  for (const Matrix& a : curvatures_) {
    if (a.rows() != d || a.cols() != d) {
      throw InvalidArgument("problems: curvature matrix has the wrong shape");
    }
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw InvalidArgument("problems: curvature matrix must be symmetric");
    }
  }
}

double FiniteSumQuadratic::value(const Vector& x, Index k) const {
  check_point(x, k);
  const Vector r = x - centers_[k];
  return 0.5 * r.dot(curvatures_[k] * r);
}

Vector FiniteSumQuadratic::gradient(const Vector& x, Index k) const {
  check_point(x, k);
  return curvatures_[k] * (x - centers_[k]);
}

Matrix FiniteSumQuadratic::hessian(const Vector& x, Index k) const {
  check_point(x, k);
  return curvatures_[k];
}

// ---------------------------------------------------------------------------

DoubleWell1D::DoubleWell1D(Vector tilts, Vector weights)
    : LossProblem(std::move(weights)), tilts_(std::move(tilts)) {
  if (tilts_.size() != component_count()) {
    throw InvalidArgument("problems: tilts and weights must have equal length");
  }
}

double DoubleWell1D::value(const Vector& x, Index k) const {
  check_point(x, k);
  const double s = x(0) * x(0) - 1.0;
  return 0.25 * s * s - tilts_(k) * x(0);
}

Vector DoubleWell1D::gradient(const Vector& x, Index k) const {
  check_point(x, k);
  return Vector::Constant(1, x(0) * x(0) * x(0) - x(0) - tilts_(k));
}

Matrix DoubleWell1D::hessian(const Vector& x, Index k) const {
  check_point(x, k);
  return Matrix::Constant(1, 1, 3.0 * x(0) * x(0) - 1.0);
}

// ---------------------------------------------------------------------------

ConfiningFamily::ConfiningFamily(std::vector<Vector> centers, double scale, Vector weights)
    : LossProblem(std::move(weights)), centers_(std::move(centers)), scale_(scale) {
  check_same_dimension(centers_, "centers");
  if (static_cast<Index>(centers_.size()) != component_count()) {
    throw InvalidArgument("problems: centers and weights must have equal length");
  }
  if (!(scale_ > 0.0)) {
    throw InvalidArgument("problems: confining scale must be positive");
  }
}

double ConfiningFamily::value(const Vector& x, Index k) const {
  check_point(x, k);
  return scale_ * std::sqrt(1.0 + (x - centers_[k]).squaredNorm());
}

Vector ConfiningFamily::gradient(const Vector& x, Index k) const {
  check_point(x, k);
  const Vector r = x - centers_[k];
  return scale_ * r / std::sqrt(1.0 + r.squaredNorm());
}

Matrix ConfiningFamily::hessian(const Vector& x, Index k) const {
  check_point(x, k);
  const Vector r = x - centers_[k];
  const double q = 1.0 + r.squaredNorm();
  const double root = std::sqrt(q);
  return scale_ * (Matrix::Identity(r.size(), r.size()) / root - r * r.transpose() / (q * root));
}

double ConfiningFamily::center_radius() const {
  double radius = 0.0;
  for (const Vector& a : centers_) {
    radius = std::max(radius, a.norm());
  }
  return radius;
}

double ConfiningFamily::radial_margin(double radius) const {
  const double a = center_radius();
  if (!(radius > a)) {
    throw InvalidArgument("problems: confinement radius must exceed max |a_k|");
  }
  return scale_ * (radius - a) / std::sqrt(1.0 + (radius + a) * (radius + a));
}

double ConfiningFamily::step_threshold(double radius) const {
  const double c = gradient_bound();
  return 2.0 * radial_margin(radius) * radius / (c * c);
}

// ---------------------------------------------------------------------------

double mean_loss(const LossProblem& problem, const Vector& x) {
  double total = 0.0;
  for (Index k = 0; k < problem.component_count(); ++k) {
    total += problem.component_weights()(k) * problem.value(x, k);
  }
  return total;
}

Vector mean_gradient(const LossProblem& problem, const Vector& x) {
  Vector total = Vector::Zero(problem.dimension());
  for (Index k = 0; k < problem.component_count(); ++k) {
    total += problem.component_weights()(k) * problem.gradient(x, k);
  }
  return total;
}

Matrix mean_hessian(const LossProblem& problem, const Vector& x) {
  const Index d = problem.dimension();
  Matrix total = Matrix::Zero(d, d);
  for (Index k = 0; k < problem.component_count(); ++k) {
    total += problem.component_weights()(k) * problem.hessian(x, k);
  }
  return total;
}

Matrix gradient_noise_covariance(const LossProblem& problem, const Vector& x) {
  const Vector mean = mean_gradient(problem, x);
  const Index d = problem.dimension();
  Matrix cov = Matrix::Zero(d, d);
  for (Index k = 0; k < problem.component_count(); ++k) {
    const Vector r = mean - problem.gradient(x, k);
    cov.noalias() += problem.component_weights()(k) * r * r.transpose();
  }
  return cov;
}

// ---------------------------------------------------------------------------

DataModel::DataModel(Matrix atoms, Vector probabilities)
    : atoms_(std::move(atoms)), probabilities_(std::move(probabilities)) {
  check_weights(probabilities_, "problems");
  if (atoms_.cols() != probabilities_.size() || atoms_.rows() == 0) {
    throw InvalidArgument("problems: need one probability per atom");
  }
  if (!atoms_.allFinite()) {
    throw InvalidArgument("problems: atoms must be finite");
  }
  const Vector mean = atoms_ * probabilities_;
  if (mean.cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidArgument("problems: data atoms must have zero mean (|mean| = " +
                          std::to_string(mean.norm()) + ")");
  }
  covariance_ = atoms_ * probabilities_.asDiagonal() * atoms_.transpose();
  bound_ = atoms_.colwise().norm().maxCoeff();
}

Vector pca_loss_gradient(const DataModel& model, const Vector& w, Index k) {
  check_unit(w, "pca_loss_gradient");
  if (k < 0 || k >= model.atom_count()) {
    throw InvalidArgument("problems: atom index out of range");
  }
  return model.atom(k) * model.atom(k).dot(w);
}

Matrix fourth_moment_contraction(const DataModel& model, const Vector& w) {
  check_unit(w, "fourth_moment_contraction");
  const Eigen::RowVectorXd projections = w.transpose() * model.atoms();
  const Vector scale = projections.transpose().cwiseAbs2().cwiseProduct(model.probabilities());
  return model.atoms() * scale.asDiagonal() * model.atoms().transpose();
}

Vector pca_spherical_gradient(const DataModel& model, const Vector& w) {
  const Vector g = model.covariance() * w;
  return g - w.dot(g) * w;
}

Matrix pca_noise_matrix(const DataModel& model, const Vector& w) {
  const Vector g = pca_spherical_gradient(model, w);
  return fourth_moment_contraction(model, w) - g * g.transpose();
}

}  // namespace sgdlab
