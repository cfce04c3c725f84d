#include "sgdlab/kolmogorov_oracle.hpp"

#include "sgdlab/discrete_chains.hpp"
#include "sgdlab/errors.hpp"
#include "sgdlab/sphere_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace sgdlab {
namespace {

struct Tridiagonal {
  Vector lower;  // lower(i) multiplies u(i-1)
  Vector diag;
  Vector upper;  // upper(i) multiplies u(i+1)
};

// Solves A x = rhs for a tridiagonal A without the corner entries.
Vector thomas(const Tridiagonal& a, const Vector& rhs) {
  const Index n = rhs.size();
  Vector c(n);
  Vector d(n);
  double beta = a.diag(0);
  c(0) = a.upper(0) / beta;
  d(0) = rhs(0) / beta;
  for (Index i = 1; i < n; ++i) {
    beta = a.diag(i) - a.lower(i) * c(i - 1);
    c(i) = a.upper(i) / beta;
    d(i) = (rhs(i) - a.lower(i) * d(i - 1)) / beta;
  }
  Vector x(n);
  x(n - 1) = d(n - 1);
  for (Index i = n - 2; i >= 0; --i) {
    x(i) = d(i) - c(i) * x(i + 1);
  }
  return x;
}

// Periodic system: a.lower(0) couples u(0) to u(n-1), a.upper(n-1) couples
// u(n-1) to u(0). Sherman-Morrison on top of two Thomas solves.
Vector cyclic_thomas(const Tridiagonal& a, const Vector& rhs) {
  const Index n = rhs.size();
  const double alpha = a.upper(n - 1);
  const double beta = a.lower(0);
  const double gamma = -a.diag(0);
  Tridiagonal b = a;
  b.diag(0) -= gamma;
  b.diag(n - 1) -= alpha * beta / gamma;
  const Vector x = thomas(b, rhs);
  Vector u = Vector::Zero(n);
  u(0) = gamma;
  u(n - 1) = alpha;
  const Vector z = thomas(b, u);
  const double factor = (x(0) + beta * x(n - 1) / gamma) / (1.0 + z(0) + beta * z(n - 1) / gamma);
  return x - factor * z;
}

// Central-difference generator rows: (L u)_i = lower u_{i-1} + diag u_i + upper u_{i+1}.
Tridiagonal generator_rows(const ParabolicProblem& problem) {
  const Grid& grid = problem.grid();
  const Index n = grid.size();
  const double h = grid.spacing();
  Tridiagonal l{Vector(n), Vector(n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    const double x = grid.node(i);
    const double a = problem.drift(x);
    const double c = problem.diffusion(x);
    if (!std::isfinite(a) || !std::isfinite(c)) {
      throw InvalidArgument("kolmogorov_oracle: non-finite coefficient at x = " + std::to_string(x));
    }
    if (c < -1e-12) {
      throw InvalidArgument("kolmogorov_oracle: negative diffusion " + std::to_string(c) +
                            " at x = " + std::to_string(x));
    }
    l.lower(i) = -a / (2.0 * h) + 0.5 * c / (h * h);
    l.diag(i) = -c / (h * h);
    l.upper(i) = a / (2.0 * h) + 0.5 * c / (h * h);
  }
  if (!grid.periodic()) {
    // Ghost node u_{-1} = u_1 and u_{n} = u_{n-2}.
    l.upper(0) += l.lower(0);
    l.lower(0) = 0.0;
    l.lower(n - 1) += l.upper(n - 1);
    l.upper(n - 1) = 0.0;
  }
  return l;
}

Vector apply_rows(const Tridiagonal& l, const Vector& u, bool periodic) {
  const Index n = u.size();
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    const double left = i > 0 ? u(i - 1) : (periodic ? u(n - 1) : 0.0);
    const double right = i + 1 < n ? u(i + 1) : (periodic ? u(0) : 0.0);
    out(i) = l.lower(i) * left + l.diag(i) * u(i) + l.upper(i) * right;
  }
  return out;
}

// Field derivatives along the circle at w(theta):
//   u_theta = t . grad U,  u_thetatheta = t^T grad^2 U t - w . grad U.
struct AngleDerivatives {
  double first;
  double second;
};

AngleDerivatives angle_derivatives(const ScalarField<double>& u, double theta) {
  Vector w(2);
  w << std::cos(theta), std::sin(theta);
  Vector t(2);
  t << -std::sin(theta), std::cos(theta);
  const Vector g = u.gradient(w);
  return {t.dot(g), t.dot(u.hessian(w) * t) - w.dot(g)};
}

struct CircleCoefficients {
  double drift;
  double diffusion;
};

CircleCoefficients circle_coefficients(const SphereSpec& spec, double theta) {
  Vector w(2);
  w << std::cos(theta), std::sin(theta);
  Vector t(2);
  t << -std::sin(theta), std::cos(theta);
  const Matrix sigma = spec.diffusion_factor(w);
  const Matrix cov = sigma * sigma.transpose();
  const Vector transport = spec.drift(w) + spec.ito_correction(w);
  return {t.dot(transport) - 0.5 * t.dot(cov * w), t.dot(cov * t)};
}

}  // namespace

ParabolicProblem reduce_to_circle(const SphereSpec& spec, const GridFunction& initial, double horizon) {
  if (spec.dimension != 2) {
    throw InvalidArgument("kolmogorov_oracle: circle reduction needs a d = 2 sphere spec");
  }
  if (!initial.grid().periodic()) {
    throw InvalidArgument("kolmogorov_oracle: circle reduction needs a circle grid");
  }

  Vector c1(2);
  c1 << 1.0, 0.0;
  Vector c2(2);
  c2 << 0.3, -0.7;
  Matrix q(2, 2);
  q << 1.0, 0.4, 0.4, -0.5;
  const std::array<ScalarField<double>, 3> fields = {
      homogeneous_extension(linear_field<double>(c1)),
      homogeneous_extension(quadratic_field<double>(q)),
      exponential_field<double>(c2)};  // not homogeneous: exercises the w . grad U terms
  for (Index j = 0; j < kCollocationPoints; ++j) {
    const double theta = 2.0 * std::numbers::pi * (static_cast<double>(j) + 0.37) / kCollocationPoints;
    const CircleCoefficients k = circle_coefficients(spec, theta);
    for (const auto& u : fields) {
      const AngleDerivatives d = angle_derivatives(u, theta);
      const double reduced = k.drift * d.first + 0.5 * k.diffusion * d.second;
      const double direct = apply_generator(spec, u, circle_point(theta));
      if (std::abs(reduced - direct) > kCollocationTolerance * std::max(1.0, std::abs(direct))) {
        throw DerivationMismatch("kolmogorov_oracle: circle coefficients give " + std::to_string(reduced) +
                                 " but the generator gives " + std::to_string(direct) +
                                 " at theta = " + std::to_string(theta));
      }
    }
  }

  const Grid& grid = initial.grid();
  Vector drift(grid.size());
  Vector diffusion(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const CircleCoefficients k = circle_coefficients(spec, grid.node(i));
    drift(i) = k.drift;
    diffusion(i) = std::max(k.diffusion, 0.0);
  }
  // The solver evaluates coefficients only at nodes; look them up there.
  const auto at_node = [grid](Vector values) {
    return [grid, values = std::move(values)](double theta) {
      const double s = theta / grid.spacing();
      const Index i = static_cast<Index>(std::llround(s)) % grid.size();
      return values(i);
    };
  };
  return ParabolicProblem{initial, at_node(std::move(drift)), at_node(std::move(diffusion)), horizon};
}

ParabolicProblem reduce_to_line(const EuclideanSpec& spec, const GridFunction& initial, double horizon) {
  if (spec.dimension != 1) {
    throw InvalidArgument("kolmogorov_oracle: line reduction needs a d = 1 Euclidean spec");
  }
  if (initial.grid().periodic()) {
    throw InvalidArgument("kolmogorov_oracle: line reduction needs an interval grid");
  }
  const auto drift = spec.drift;
  const auto cov = spec.diffusion_covariance;
  return ParabolicProblem{
      initial,
      [drift](double x) { return drift(Vector::Constant(1, x))(0); },
      [cov](double x) { return std::max(cov(Vector::Constant(1, x))(0, 0), 0.0); },
      horizon};
}

GridFunction crank_nicolson(const ParabolicProblem& problem, Index time_steps) {
  if (time_steps < 1) {
    throw InvalidArgument("kolmogorov_oracle: at least one time step required");
  }
  if (!(problem.horizon >= 0.0)) {
    throw InvalidArgument("kolmogorov_oracle: horizon must be nonnegative");
  }
  const bool periodic = problem.grid().periodic();
  const Tridiagonal l = generator_rows(problem);
  const double dt = problem.horizon / static_cast<double>(time_steps);

  Tridiagonal implicit{-0.5 * dt * l.lower, Vector(1.0 - 0.5 * dt * l.diag.array()), -0.5 * dt * l.upper};
  Vector u = problem.initial.values();
  for (Index step = 0; step < time_steps; ++step) {
    const Vector rhs = u + 0.5 * dt * apply_rows(l, u, periodic);
    u = periodic ? cyclic_thomas(implicit, rhs) : thomas(implicit, rhs);
  }
  return GridFunction(problem.grid(), std::move(u));
}

OracleSolution solve_backward(const ParabolicProblem& problem, Index time_steps, double tolerance) {
  const GridFunction coarse = crank_nicolson(problem, time_steps);
  GridFunction fine = crank_nicolson(problem, 2 * time_steps);
  const double check = (coarse.values() - fine.values()).cwiseAbs().maxCoeff();
  if (!(check <= tolerance)) {
    throw RefinementFailure("kolmogorov_oracle: step-doubling self-check " + std::to_string(check) +
                            " exceeds " + std::to_string(tolerance) + " with " +
                            std::to_string(time_steps) + " time steps");
  }
  return OracleSolution{std::move(fine), check, 2 * time_steps};
}

OracleSolution solve_backward_refined(const ParabolicProblem& problem, Index initial_time_steps,
                                      Index max_time_steps, double tolerance) {
  Index steps = initial_time_steps;
  while (true) {
    try {
      return solve_backward(problem, steps, tolerance);
    } catch (const RefinementFailure&) {
      if (2 * steps > max_time_steps) {
        throw;
      }
      steps *= 2;
    }
  }
}

}  // namespace sgdlab
