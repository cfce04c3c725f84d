#include "doctest.h"
#include "generators.hpp"

#include "sgdlab/errors.hpp"
#include "sgdlab/linalg.hpp"
#include "sgdlab/problems.hpp"

#include <cmath>
#include <memory>

using namespace sgdlab;

namespace {

// Central differences of value and gradient.
Vector fd_gradient(const LossProblem& p, const Vector& x, Index k, double h = 1e-6) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (p.value(a, k) - p.value(b, k)) / (2 * h);
  }
  return g;
}

Matrix fd_hessian(const LossProblem& p, const Vector& x, Index k, double h = 1e-5) {
  Matrix hess(x.size(), x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    hess.col(i) = (p.gradient(a, k) - p.gradient(b, k)) / (2 * h);
  }
  return hess;
}

void check_derivatives(const LossProblem& p, gen::Source& src, double radius) {
  for (int trial = 0; trial < 25; ++trial) {
    const Vector x = src.box(p.dimension(), -radius, radius);
    for (Index k = 0; k < p.component_count(); ++k) {
      CHECK((p.gradient(x, k) - fd_gradient(p, x, k)).norm() < 1e-6 * (1 + p.gradient(x, k).norm()));
      CHECK((p.hessian(x, k) - fd_hessian(p, x, k)).norm() < 1e-6 * (1 + p.hessian(x, k).norm()));
    }
  }
}

std::shared_ptr<ConfiningFamily> random_confining(gen::Source& src, Index d, Index atoms) {
  std::vector<Vector> centers;
  for (Index k = 0; k < atoms; ++k) {
    centers.push_back(src.box(d, -0.6, 0.6));
  }
  return std::make_shared<ConfiningFamily>(centers, src.uniform(0.5, 2.0), src.weights(atoms));
}

}  // namespace

TEST_CASE("quadratic family derivatives match finite differences") {
  gen::Source src(11);
  for (Index d : {1, 2, 4}) {
    std::vector<Vector> centers;
    std::vector<Matrix> curvatures;
    for (int k = 0; k < 3; ++k) {
      centers.push_back(src.gaussian(d));
      const Matrix b = src.symmetric(d);
      curvatures.push_back(b * b.transpose() + Matrix::Identity(d, d));
    }
    const FiniteSumQuadratic p(centers, curvatures, src.weights(3));
    check_derivatives(p, src, 2.0);
    const Vector x = src.gaussian(d);
    CHECK(p.value(x, 1) == doctest::Approx(0.5 * (x - centers[1]).dot(curvatures[1] * (x - centers[1]))));
  }
}

TEST_CASE("double well and confining derivatives match finite differences") {
  gen::Source src(12);
  DoubleWell1D well(Vector::Constant(1, 0.3).eval(), Vector::Ones(1));
  check_derivatives(well, src, 2.0);
  check_derivatives(*random_confining(src, 1, 2), src, 3.0);
  check_derivatives(*random_confining(src, 3, 4), src, 3.0);
}

TEST_CASE("double well closed form") {
  Vector tilts(2);
  tilts << 0.3, -0.3;
  DoubleWell1D well(tilts, Vector::Constant(2, 0.5));
  Vector x(1);
  x << 0.7;
  CHECK(well.value(x, 0) == doctest::Approx(std::pow(0.49 - 1, 2) / 4 - 0.21));
  CHECK(well.gradient(x, 1)(0) == doctest::Approx(0.343 - 0.7 + 0.3));
  CHECK(well.hessian(x, 0)(0, 0) == doctest::Approx(3 * 0.49 - 1));
}

TEST_CASE("weights are validated") {
  std::vector<Vector> centers = {Vector::Zero(1), Vector::Ones(1)};
  std::vector<Matrix> curv = {Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  CHECK_THROWS_AS(FiniteSumQuadratic(centers, curv, Vector::Constant(2, 0.6)), InvalidArgument);
  Vector negative(2);
  negative << 1.5, -0.5;
  CHECK_THROWS_AS(FiniteSumQuadratic(centers, curv, negative), InvalidArgument);
  CHECK_NOTHROW(FiniteSumQuadratic(centers, curv, Vector::Constant(2, 0.5)));
}

TEST_CASE("property: confining gradients are bounded by the scale") {
  gen::Source src(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_confining(src, src.integer(1, 4), src.integer(1, 4));
    for (int i = 0; i < 50; ++i) {
      const Vector x = src.gaussian(p->dimension()) * src.uniform(0, 50);
      for (Index k = 0; k < p->component_count(); ++k) {
        CHECK(p->gradient(x, k).norm() < p->gradient_bound());
      }
    }
  }
}

TEST_CASE("property: radial margin holds outside the ball") {
  gen::Source src(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_confining(src, src.integer(1, 4), src.integer(1, 3));
    const double radius = p->center_radius() + src.uniform(0.1, 3.0);
    const double margin = p->radial_margin(radius);
    CHECK(margin > 0);
    for (int i = 0; i < 100; ++i) {
      const Vector x = src.unit(p->dimension()) * radius * src.uniform(1.0, 4.0);
      for (Index k = 0; k < p->component_count(); ++k) {
        CHECK(x.normalized().dot(p->gradient(x, k)) >= margin - 1e-12);
      }
    }
    const double c = p->gradient_bound();
    CHECK(p->step_threshold(radius) == doctest::Approx(2 * margin * radius / (c * c)));
  }
}

TEST_CASE("gradient noise covariance of two atoms") {
  gen::Source src(15);
  std::vector<Vector> centers = {src.gaussian(2), src.gaussian(2)};
  std::vector<Matrix> curv = {Matrix::Identity(2, 2), 2 * Matrix::Identity(2, 2)};
  Vector w(2);
  w << 0.3, 0.7;
  const FiniteSumQuadratic p(centers, curv, w);
  const Vector x = src.gaussian(2);
  const Vector diff = p.gradient(x, 0) - p.gradient(x, 1);
  CHECK((gradient_noise_covariance(p, x) - 0.21 * diff * diff.transpose()).norm() < 1e-13);
  CHECK((mean_gradient(p, x) - (0.3 * p.gradient(x, 0) + 0.7 * p.gradient(x, 1))).norm() < 1e-14);
  CHECK(mean_loss(p, x) == doctest::Approx(0.3 * p.value(x, 0) + 0.7 * p.value(x, 1)));
}

TEST_CASE("data model validation and moments") {
  Matrix atoms(2, 3);
  atoms << 1.0, -0.6, -0.4, 0.2, 0.7, -0.9;
  const Vector probs = Vector::Constant(3, 1.0 / 3.0);
  const DataModel model(atoms, probs);
  Matrix sigma = Matrix::Zero(2, 2);
  for (Index k = 0; k < 3; ++k) {
    sigma += atoms.col(k) * atoms.col(k).transpose() / 3.0;
  }
  CHECK((model.covariance() - sigma).norm() < 1e-15);
  CHECK(model.bound() == doctest::Approx(atoms.colwise().norm().maxCoeff()));

  Matrix shifted = atoms;
  shifted.row(0).array() += 0.1;
  CHECK_THROWS_AS(DataModel(shifted, probs), InvalidArgument);
}

TEST_CASE("property: fourth moment and PCA noise matrix") {
  Matrix atoms(2, 3);
  atoms << 1.0, -0.6, -0.4, 0.2, 0.7, -0.9;
  const DataModel model(atoms, Vector::Constant(3, 1.0 / 3.0));
  gen::Source src(16);
  for (int i = 0; i < 100; ++i) {
    const Vector w = src.unit(2);
    Matrix m = Matrix::Zero(2, 2);
    for (Index k = 0; k < 3; ++k) {
      const double s = atoms.col(k).dot(w);
      m += s * s * atoms.col(k) * atoms.col(k).transpose() / 3.0;
      CHECK((pca_loss_gradient(model, w, k) - s * atoms.col(k)).norm() < 1e-15);
    }
    CHECK((fourth_moment_contraction(model, w) - m).norm() < 1e-14);
    const Vector g = model.covariance() * w - w.dot(model.covariance() * w) * w;
    CHECK((pca_spherical_gradient(model, w) - g).norm() < 1e-14);
    const Matrix noise = pca_noise_matrix(model, w);
    CHECK((noise - (m - g * g.transpose())).norm() < 1e-14);
    CHECK(min_symmetric_eigenvalue(noise) > 0.1);
  }
}

TEST_CASE("psd square root") {
  gen::Source src(17);
  for (int i = 0; i < 20; ++i) {
    const Index d = src.integer(1, 5);
    const Matrix b = Eigen::Map<const Matrix>(src.gaussian(d * d).data(), d, d);
    const Matrix a = b * b.transpose();
    const Matrix r = psd_sqrt(a);
    CHECK((r * r - a).norm() < 1e-10 * (1 + a.norm()));
    CHECK((r - r.transpose()).norm() < 1e-12 * (1 + r.norm()));
  }
  Matrix bad(2, 2);
  bad << 1, 0, 0, -0.1;
  CHECK_THROWS_AS(psd_sqrt(bad), PsdViolation);
}
