#include "doctest.h"

#include "sgdlab/discrete_chains.hpp"
#include "sgdlab/errors.hpp"
#include "sgdlab/kolmogorov_oracle.hpp"

#include <cmath>
#include <memory>
#include <numbers>

using namespace sgdlab;

namespace {

// E exp(-X_T^2 / 2) for dX = -k X dt + sqrt(s) dW, X_0 = x.
double ou_expectation(double x, double k, double s, double t) {
  const double m = x * std::exp(-k * t);
  const double v = s * (1 - std::exp(-2 * k * t)) / (2 * k);
  return std::exp(-m * m / (2 * (1 + v))) / std::sqrt(1 + v);
}

ParabolicProblem ou_problem(Index cells, double horizon) {
  const Grid grid = Grid::interval(-6.0, 6.0, cells);
  ParabolicProblem p{GridFunction::sample(grid, [](double x) { return std::exp(-0.5 * x * x); }),
                     [](double x) { return -0.8 * x; }, [](double) { return 0.3; }, horizon};
  return p;
}

}  // namespace

TEST_CASE("Crank-Nicolson reproduces the Ornstein-Uhlenbeck kernel") {
  const ParabolicProblem p = ou_problem(2048, 1.0);
  const OracleSolution sol = solve_backward_refined(p, 256, Index{1} << 14);
  CHECK(sol.time_steps >= 512);
  CHECK(sol.self_check < kSelfCheckTolerance);
  double worst = 0;
  for (Index i = 0; i < p.grid().size(); ++i) {
    const double x = p.grid().node(i);
    if (std::abs(x) <= 3.0) {
      worst = std::max(worst, std::abs(sol.solution.values()(i) - ou_expectation(x, 0.8, 0.3, 1.0)));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("Crank-Nicolson is second order in time") {
  const ParabolicProblem p = ou_problem(512, 1.0);
  const GridFunction reference = crank_nicolson(p, 4096);
  const double e1 = (crank_nicolson(p, 16).values() - reference.values()).cwiseAbs().maxCoeff();
  const double e2 = (crank_nicolson(p, 32).values() - reference.values()).cwiseAbs().maxCoeff();
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("self-check failures and refinement") {
  const ParabolicProblem p = ou_problem(512, 1.0);
  CHECK_THROWS_AS(solve_backward(p, 4, 1e-12), RefinementFailure);
  const OracleSolution refined = solve_backward_refined(p, 4, Index{1} << 14, 1e-8);
  CHECK(refined.self_check <= 1e-8);
  CHECK(refined.time_steps > 8);
  CHECK_THROWS_AS(solve_backward_refined(p, 4, 16, 1e-14), RefinementFailure);
}

TEST_CASE("circle heat equation decays harmonics") {
  // Brownian motion on the circle at speed eta: u_t = eta/2 u_thetatheta.
  const double eta = 0.7;
  const double horizon = 1.3;
  const Grid grid = Grid::circle(1024);
  const GridFunction initial = GridFunction::sample(grid, [](double t) { return std::cos(t) + std::sin(3 * t); });
  const ParabolicProblem p = reduce_to_circle(spherical_brownian_motion(2, eta), initial, horizon);
  const OracleSolution sol = solve_backward_refined(p, 64, Index{1} << 16);
  double worst = 0;
  for (Index i = 0; i < grid.size(); ++i) {
    const double t = grid.node(i);
    const double exact = std::exp(-eta * horizon / 2) * std::cos(t) + std::exp(-9 * eta * horizon / 2) * std::sin(3 * t);
    worst = std::max(worst, std::abs(sol.solution.values()(i) - exact));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("circle reduction of the PCA diffusion") {
  Matrix atoms(2, 3);
  atoms << 1.0, -0.6, -0.4, 0.2, 0.7, -0.9;
  const auto model = std::make_shared<DataModel>(atoms, Vector::Constant(3, 1.0 / 3.0));
  const Grid grid = Grid::circle(256);
  const GridFunction initial = GridFunction::sample(grid, [](double t) { return std::cos(t); });
  for (int order : {1, 2}) {
    const SphereSpec spec = build_spec(model, order, 0.1);
    const ParabolicProblem p = reduce_to_circle(spec, initial, 1.0);
    for (Index i = 0; i < grid.size(); i += 17) {
      const double theta = grid.node(i);
      const Vector w = circle_point(theta);
      const Vector t = circle_point(theta + std::numbers::pi / 2);
      const Matrix sigma = spec.diffusion_factor(w);
      const Matrix cov = sigma * sigma.transpose();
      CHECK(p.diffusion(theta) == doctest::Approx(t.dot(cov * t)).epsilon(1e-12));
      const double drift = t.dot(spec.drift(w) + spec.ito_correction(w)) - 0.5 * t.dot(cov * w);
      CHECK(p.drift(theta) == doctest::Approx(drift).epsilon(1e-12));
    }
  }
}

TEST_CASE("reductions validate their inputs") {
  Vector w(2);
  w << 1.0, 0.0;
  const GridFunction on_line = GridFunction::sample(Grid::interval(-1.0, 1.0, 32), [](double) { return 1.0; });
  CHECK_THROWS_AS(reduce_to_circle(spherical_brownian_motion(2, 0.1), on_line, 1.0), InvalidArgument);
  CHECK_THROWS_AS(reduce_to_circle(spherical_brownian_motion(3, 0.1),
                                   GridFunction::sample(Grid::circle(32), [](double) { return 1.0; }), 1.0),
                  InvalidArgument);

  std::vector<Vector> centers = {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
  std::vector<Matrix> curv = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.5)};
  const auto problem = std::make_shared<FiniteSumQuadratic>(centers, curv, Vector::Constant(2, 0.5));
  const EuclideanSpec spec = build_spec(problem, 2, 0.1);
  const ParabolicProblem p = reduce_to_line(spec, on_line, 1.0);
  const Vector x = Vector::Constant(1, 0.3);
  CHECK(p.drift(0.3) == doctest::Approx(spec.drift(x)(0)));
  CHECK(p.diffusion(0.3) == doctest::Approx(spec.diffusion_covariance(x)(0, 0)));
}
