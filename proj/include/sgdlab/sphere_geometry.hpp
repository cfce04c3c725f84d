#pragma once

// Calculus on the unit sphere S^{d-1} embedded in R^d. Sphere functions are
// handled through ambient extensions: a field carries its value, gradient and
// Hessian on a neighbourhood of the sphere, and the tangential operators below
// are assembled from those ambient derivatives. None of the results depend on
// which extension is used.

#include "sgdlab/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <string>

namespace sgdlab {

/// Below this length a vector has no meaningful direction.
inline constexpr double kDegenerateNorm = 1e-14;
/// |w| must equal 1 within this tolerance for a SpherePoint.
inline constexpr double kUnitNormTolerance = 1e-12;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A point of S^{d-1}; construction enforces |w| = 1.
template <typename Scalar = double>
class SpherePoint {
 public:
  explicit SpherePoint(VectorX<Scalar> w) : w_(std::move(w)) {
    using std::abs;
    if (abs(w_.norm() - Scalar(1)) > Scalar(kUnitNormTolerance)) {
      throw InvalidArgument("sphere_geometry: not a unit vector (|w| = " +
                            std::to_string(static_cast<double>(w_.norm())) + ")");
    }
  }

  const VectorX<Scalar>& vector() const { return w_; }
  Eigen::Index dimension() const { return w_.size(); }

 private:
  VectorX<Scalar> w_;
};

/// Scalar field on a neighbourhood of the sphere given by an ambient extension.
template <typename Scalar = double>
struct ScalarField {
  std::function<Scalar(const VectorX<Scalar>&)> value;
  std::function<VectorX<Scalar>(const VectorX<Scalar>&)> gradient;
  std::function<MatrixX<Scalar>(const VectorX<Scalar>&)> hessian;
};

/// Tangential projection v - (w.v) w, i.e. (I - w w^T) v.
template <typename DW, typename DV>
auto project(const Eigen::MatrixBase<DW>& w, const Eigen::MatrixBase<DV>& v) {
  return (v - w.dot(v) * w).eval();
}

/// The projector I - w w^T.
template <typename DW>
auto tangent_projector(const Eigen::MatrixBase<DW>& w) {
  using Scalar = typename DW::Scalar;
  return (MatrixX<Scalar>::Identity(w.size(), w.size()) - w * w.transpose()).eval();
}

/// v / |v|; throws DegenerateInput when |v| < 1e-14.
template <typename DV>
SpherePoint<typename DV::Scalar> normalize(const Eigen::MatrixBase<DV>& v) {
  using Scalar = typename DV::Scalar;
  const Scalar length = v.norm();
  if (!(length >= Scalar(kDegenerateNorm))) {
    throw DegenerateInput("sphere_geometry: cannot normalise a vector of length " +
                          std::to_string(static_cast<double>(length)));
  }
  return SpherePoint<Scalar>(VectorX<Scalar>(v / length));
}

/// grad_S u(w) = (I - w w^T) grad u(w).
template <typename Scalar, typename DW>
VectorX<Scalar> spherical_gradient(const ScalarField<Scalar>& u, const Eigen::MatrixBase<DW>& w) {
  const VectorX<Scalar> point = w;
  return project(point, u.gradient(point));
}

/// grad_S^2 u = P H P - (w . grad u) P - (P grad u) w^T with P = I - w w^T and
/// H the ambient Hessian. Row index is the differentiation direction; the
/// correction terms make the result independent of the extension.
template <typename Scalar, typename DW>
MatrixX<Scalar> spherical_hessian(const ScalarField<Scalar>& u, const Eigen::MatrixBase<DW>& w) {
  const VectorX<Scalar> point = w;
  const MatrixX<Scalar> p = tangent_projector(point);
  const VectorX<Scalar> g = u.gradient(point);
  const VectorX<Scalar> tangential = p * g;
  return p * u.hessian(point) * p - point.dot(g) * p - tangential * point.transpose();
}

/// Delta_S u = tr(grad_S^2 u).
template <typename Scalar, typename DW>
Scalar laplace_beltrami(const ScalarField<Scalar>& u, const Eigen::MatrixBase<DW>& w) {
  return spherical_hessian(u, w).trace();
}

template <typename Scalar = double>
struct TaylorTerms {
  Scalar base = 0;    ///< u(w)
  Scalar value = 0;   ///< u((w + eta v) / |w + eta v|), evaluated exactly
  Scalar order1 = 0;  ///< eta v . grad_S u
  Scalar order2 = 0;  ///< eta^2/2 (v v : grad_S^2 u - (w . v)(v . grad_S u))

  Scalar remainder() const { return value - base - order1 - order2; }
};

/// Second-order expansion of a sphere function along the normalised
/// perturbation w -> (w + eta v)/|w + eta v|. The remainder is O(eta^3).
template <typename Scalar, typename DW, typename DV>
TaylorTerms<Scalar> taylor_expand_normalized(const ScalarField<Scalar>& u,
                                             const Eigen::MatrixBase<DW>& w,
                                             const Eigen::MatrixBase<DV>& v, Scalar eta) {
  const VectorX<Scalar> point = w;
  const VectorX<Scalar> direction = v;
  const VectorX<Scalar> grad_s = spherical_gradient(u, point);
  const MatrixX<Scalar> hess_s = spherical_hessian(u, point);

  TaylorTerms<Scalar> terms;
  terms.base = u.value(point);
  terms.value = u.value(normalize(VectorX<Scalar>(point + eta * direction)).vector());
  terms.order1 = eta * direction.dot(grad_s);
  terms.order2 = Scalar(0.5) * eta * eta *
                 (direction.dot(hess_s * direction) - point.dot(direction) * direction.dot(grad_s));
  return terms;
}

/// Degree-zero homogeneous extension u(x) = g(x/|x|) of an ambient function g,
/// with exact chain-rule derivatives. With r = |x|, x^ = x/r, P = I - x^ x^^T:
///   grad u = P grad g / r
///   hess u = (P Hg P - (P grad g) x^^T - x^ (P grad g)^T - (x^ . grad g) P) / r^2
template <typename Scalar>
ScalarField<Scalar> homogeneous_extension(ScalarField<Scalar> g) {
  auto shared = std::make_shared<const ScalarField<Scalar>>(std::move(g));
  ScalarField<Scalar> u;
  u.value = [shared](const VectorX<Scalar>& x) { return shared->value(VectorX<Scalar>(x / x.norm())); };
  u.gradient = [shared](const VectorX<Scalar>& x) {
    const Scalar r = x.norm();
    const VectorX<Scalar> unit = x / r;
    return VectorX<Scalar>(project(unit, shared->gradient(unit)) / r);
  };
  u.hessian = [shared](const VectorX<Scalar>& x) {
    const Scalar r = x.norm();
    const VectorX<Scalar> unit = x / r;
    const MatrixX<Scalar> p = tangent_projector(unit);
    const VectorX<Scalar> g1 = shared->gradient(unit);
    const VectorX<Scalar> pg = p * g1;
    const MatrixX<Scalar> h = p * shared->hessian(unit) * p - pg * unit.transpose() -
                              unit * pg.transpose() - unit.dot(g1) * p;
    return MatrixX<Scalar>(h / (r * r));
  };
  return u;
}

/// g(x) = c . x
template <typename Scalar = double>
ScalarField<Scalar> linear_field(VectorX<Scalar> c) {
  const Eigen::Index d = c.size();
  ScalarField<Scalar> g;
  g.value = [c](const VectorX<Scalar>& x) { return c.dot(x); };
  g.gradient = [c](const VectorX<Scalar>&) { return c; };
  g.hessian = [d](const VectorX<Scalar>&) { return MatrixX<Scalar>(MatrixX<Scalar>::Zero(d, d)); };
  return g;
}

/// g(x) = 1/2 x^T A x for symmetric A.
template <typename Scalar = double>
ScalarField<Scalar> quadratic_field(MatrixX<Scalar> a) {
  ScalarField<Scalar> g;
  g.value = [a](const VectorX<Scalar>& x) { return Scalar(0.5) * x.dot(a * x); };
  g.gradient = [a](const VectorX<Scalar>& x) { return VectorX<Scalar>(a * x); };
  g.hessian = [a](const VectorX<Scalar>&) { return a; };
  return g;
}

/// g(x) = exp(c . x); a generic non-polynomial smooth field.
template <typename Scalar = double>
ScalarField<Scalar> exponential_field(VectorX<Scalar> c) {
  using std::exp;
  ScalarField<Scalar> g;
  g.value = [c](const VectorX<Scalar>& x) { return exp(c.dot(x)); };
  g.gradient = [c](const VectorX<Scalar>& x) { return VectorX<Scalar>(exp(c.dot(x)) * c); };
  g.hessian = [c](const VectorX<Scalar>& x) {
    return MatrixX<Scalar>(exp(c.dot(x)) * c * c.transpose());
  };
  return g;
}

/// g(x) = a constant.
template <typename Scalar = double>
ScalarField<Scalar> constant_field(Eigen::Index dimension, Scalar level) {
  ScalarField<Scalar> g;
  g.value = [level](const VectorX<Scalar>&) { return level; };
  g.gradient = [dimension](const VectorX<Scalar>&) {
    return VectorX<Scalar>(VectorX<Scalar>::Zero(dimension));
  };
  g.hessian = [dimension](const VectorX<Scalar>&) {
    return MatrixX<Scalar>(MatrixX<Scalar>::Zero(dimension, dimension));
  };
  return g;
}

/// Sum of two fields.
template <typename Scalar>
ScalarField<Scalar> operator+(ScalarField<Scalar> a, ScalarField<Scalar> b) {
  ScalarField<Scalar> s;
  s.value = [a, b](const VectorX<Scalar>& x) { return a.value(x) + b.value(x); };
  s.gradient = [a, b](const VectorX<Scalar>& x) {
    return VectorX<Scalar>(a.gradient(x) + b.gradient(x));
  };
  s.hessian = [a, b](const VectorX<Scalar>& x) {
    return MatrixX<Scalar>(a.hessian(x) + b.hessian(x));
  };
  return s;
}

}  // namespace sgdlab
