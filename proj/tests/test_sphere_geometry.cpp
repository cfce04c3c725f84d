#include "doctest.h"
#include "generators.hpp"

#include "sgdlab/sphere_geometry.hpp"

#include <cmath>

using namespace sgdlab;

namespace {

ScalarField<double> sample_field(gen::Source& src, Index d) {
  return exponential_field<double>(src.gaussian(d) / 2) + quadratic_field<double>(src.symmetric(d)) +
         linear_field<double>(src.gaussian(d));
}

// u(x) (1 + k (|x|^2 - 1)): a different extension with the same sphere values.
ScalarField<double> radially_modified(const ScalarField<double>& u, double k) {
  ScalarField<double> v;
  v.value = [=](const Vector& x) { return u.value(x) * (1 + k * (x.squaredNorm() - 1)); };
  v.gradient = [=](const Vector& x) {
    return Vector(u.gradient(x) * (1 + k * (x.squaredNorm() - 1)) + 2 * k * u.value(x) * x);
  };
  v.hessian = [=](const Vector& x) {
    const Index d = x.size();
    const Vector g = u.gradient(x);
    return Matrix(u.hessian(x) * (1 + k * (x.squaredNorm() - 1)) + 2 * k * (g * x.transpose() + x * g.transpose()) +
                  2 * k * u.value(x) * Matrix::Identity(d, d));
  };
  return v;
}

// u along the great circle cos(t) w + sin(t) v.
double along(const ScalarField<double>& u, const Vector& w, const Vector& v, double t) {
  return u.value(std::cos(t) * w + std::sin(t) * v);
}

}  // namespace

TEST_CASE("sphere points and normalisation") {
  CHECK_THROWS_AS(SpherePoint<double>(Vector::Constant(2, 1.0)), InvalidArgument);
  CHECK_THROWS_AS(normalize(Vector::Zero(3)), DegenerateInput);
  CHECK_THROWS_AS(normalize(Vector::Constant(3, 1e-15)), DegenerateInput);
  Vector v(3);
  v << 3, 0, 4;
  CHECK((normalize(v).vector() - v / 5).norm() < 1e-16);
  const Vector w = normalize(v).vector();
  CHECK(std::abs(w.dot(project(w, Vector::Ones(3).eval()))) < 1e-15);
  CHECK((tangent_projector(w) * w).norm() < 1e-15);
}

TEST_CASE("property: spherical derivatives match great-circle differences") {
  gen::Source src(21);
  for (int trial = 0; trial < 40; ++trial) {
    const Index d = src.integer(2, 6);
    const ScalarField<double> u = sample_field(src, d);
    const Vector w = src.unit(d);
    const Vector v = src.tangent(w);
    const double h = 1e-4;
    const double first = (along(u, w, v, h) - along(u, w, v, -h)) / (2 * h);
    const double second = (along(u, w, v, h) - 2 * along(u, w, v, 0) + along(u, w, v, -h)) / (h * h);
    CHECK(v.dot(spherical_gradient(u, w)) == doctest::Approx(first).epsilon(1e-6));
    CHECK(v.dot(spherical_hessian(u, w) * v) == doctest::Approx(second).epsilon(1e-5));
    CHECK(std::abs(w.dot(spherical_gradient(u, w))) < 1e-13);
  }
}

TEST_CASE("property: spherical derivatives do not depend on the extension") {
  gen::Source src(22);
  for (int trial = 0; trial < 40; ++trial) {
    const Index d = src.integer(2, 6);
    const ScalarField<double> u = sample_field(src, d);
    const ScalarField<double> v = radially_modified(u, src.uniform(-2, 2));
    const ScalarField<double> h = homogeneous_extension(u);
    const Vector w = src.unit(d);
    const Vector g = spherical_gradient(u, w);
    const Matrix hess = spherical_hessian(u, w);
    CHECK((spherical_gradient(v, w) - g).norm() < 1e-8 * (1 + g.norm()));
    CHECK((spherical_gradient(h, w) - g).norm() < 1e-8 * (1 + g.norm()));
    CHECK((spherical_hessian(v, w) - hess).norm() < 1e-8 * (1 + hess.norm()));
    CHECK((spherical_hessian(h, w) - hess).norm() < 1e-8 * (1 + hess.norm()));
  }
}

TEST_CASE("Laplace-Beltrami of linear and quadratic harmonics") {
  gen::Source src(23);
  for (Index d : {2, 3, 5}) {
    const Vector c = src.gaussian(d);
    const Vector w = src.unit(d);
    // Restrictions of linear functions are eigenfunctions with eigenvalue -(d - 1).
    CHECK(laplace_beltrami(linear_field<double>(c), w) == doctest::Approx(-(d - 1.0) * c.dot(w)));
    // Traceless quadratics: eigenvalue -2d.
    Matrix a = src.symmetric(d);
    a -= a.trace() / static_cast<double>(d) * Matrix::Identity(d, d);
    CHECK(laplace_beltrami(quadratic_field<double>(a), w) == doctest::Approx(-2.0 * d * 0.5 * w.dot(a * w)));
  }
}

TEST_CASE("property: Taylor expansion of the normalised perturbation") {
  gen::Source src(24);
  for (int trial = 0; trial < 30; ++trial) {
    const Index d = src.integer(2, 5);
    const ScalarField<double> u = sample_field(src, d);
    const Vector w = src.unit(d);
    const Vector v = src.gaussian(d);

    // First-order term against a central difference of eta -> u(Q(w + eta v)).
    const double h = 1e-5;
    const double slope =
        (u.value((w + h * v).normalized()) - u.value((w - h * v).normalized())) / (2 * h);
    CHECK(taylor_expand_normalized(u, w, v, 1.0).order1 == doctest::Approx(slope).epsilon(1e-7));

    // Remainder / eta^3 settles to the cubic coefficient. A plain ratio test
    // would trip on draws where that coefficient happens to be tiny.
    const double c1 = taylor_expand_normalized(u, w, v, 1e-3).remainder() / 1e-9;
    const double c2 = taylor_expand_normalized(u, w, v, 5e-4).remainder() / 1.25e-10;
    CHECK(std::abs(c1 - c2) < 0.05 * (1.0 + std::abs(c2)));

    // A radial perturbation is invisible after normalisation.
    const TaylorTerms<double> radial = taylor_expand_normalized(u, w, Vector(0.4 * w), 0.1);
    CHECK(std::abs(radial.order1) < 1e-14);
    CHECK(std::abs(radial.order2) < 1e-14);
    CHECK(std::abs(radial.remainder()) < 1e-12);
  }
}

TEST_CASE("Taylor terms in long double agree with double") {
  gen::Source src(25);
  const Vector c = src.gaussian(3);
  const Vector w = src.unit(3);
  const Vector v = src.gaussian(3);
  const auto ud = exponential_field<double>(c);
  const auto ul = exponential_field<long double>(c.cast<long double>());
  const auto td = taylor_expand_normalized(ud, w, v, 1e-2);
  const auto tl = taylor_expand_normalized(ul, VectorX<long double>(w.cast<long double>()),
                                           VectorX<long double>(v.cast<long double>()), 1e-2L);
  CHECK(static_cast<double>(tl.order2) == doctest::Approx(td.order2).epsilon(1e-12));
}
