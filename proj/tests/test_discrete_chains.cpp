#include "doctest.h"
#include "generators.hpp"

#include "sgdlab/discrete_chains.hpp"
#include "sgdlab/errors.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

using namespace sgdlab;

namespace {

std::shared_ptr<FiniteSumQuadratic> two_well_quadratic(double c0 = 1.0, double c1 = 1.5) {
  std::vector<Vector> centers = {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
  std::vector<Matrix> curv = {Matrix::Constant(1, 1, c0), Matrix::Constant(1, 1, c1)};
  return std::make_shared<FiniteSumQuadratic>(centers, curv, Vector::Constant(2, 0.5));
}

DataModel circle_model() {
  Matrix atoms(2, 3);
  atoms << 1.0, -0.6, -0.4, 0.2, 0.7, -0.9;
  return DataModel(atoms, Vector::Constant(3, 1.0 / 3.0));
}

ChainConfig config(double eta, Index steps, Vector x0, std::uint64_t seed = 7) {
  ChainConfig c;
  c.step_size = eta;
  c.steps = steps;
  c.seed = seed;
  c.initial_state = std::move(x0);
  return c;
}

}  // namespace

TEST_CASE("single steps in closed form") {
  const auto p = two_well_quadratic();
  const Vector x = Vector::Constant(1, 0.4);
  CHECK(sgd_step(*p, x, 0, 0.1)(0) == doctest::Approx(0.4 - 0.1 * (0.4 - 1.0)));
  CHECK(sgd_step(*p, x, 1, 0.1)(0) == doctest::Approx(0.4 - 0.15 * 1.4));

  const DataModel model = circle_model();
  const Vector w = circle_point(0.3);
  const Vector xi = model.atom(1);
  const Vector raw = w + 0.2 * xi * xi.dot(w);
  CHECK((sga_step(model, w, 1, 0.2).vector() - raw / raw.norm()).norm() < 1e-15);
}

TEST_CASE("chains are reproducible and follow their atom sequences") {
  const auto p = two_well_quadratic();
  const ChainConfig c = config(0.1, 50, Vector::Constant(1, 0.5));
  const Trajectory a = run_chain(c, *p, 3);
  const Trajectory b = run_chain(c, *p, 3);
  REQUIRE(a.size() == 51);
  CHECK(a.back() == b.back());
  CHECK(run_chain(c, *p, 4).back() != a.back());

  const std::vector<Index> atoms = {0, 1, 1};
  const Trajectory t = run_chain(config(0.1, 3, Vector::Constant(1, 0.5)), *p, atoms);
  Vector x = Vector::Constant(1, 0.5);
  for (Index k : atoms) {
    x = sgd_step(*p, x, k, 0.1);
  }
  CHECK(t.back()(0) == x(0));
  CHECK_THROWS_AS(run_chain(config(0.1, 2, Vector::Constant(1, 0.5)), *p, atoms), InvalidArgument);
  CHECK_THROWS_AS(run_chain(config(-0.1, 2, Vector::Constant(1, 0.5)), *p), InvalidArgument);
}

TEST_CASE("atom frequencies follow the weights") {
  Vector w(3);
  w << 0.2, 0.5, 0.3;
  AtomStream s(w, 99, 0);
  Vector counts = Vector::Zero(3);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    counts(s.next()) += 1;
  }
  for (Index k = 0; k < 3; ++k) {
    const double se = std::sqrt(w(k) * (1 - w(k)) / n);
    CHECK(std::abs(counts(k) / n - w(k)) < 5 * se);
  }
}

TEST_CASE("Monte Carlo semigroup against exact enumeration") {
  const auto p = two_well_quadratic();
  const TestFunction phi = [](const Vector& x) { return std::cos(2 * x(0)); };
  const double eta = 0.3;
  const Vector x0 = Vector::Constant(1, 0.2);
  // Two steps, two atoms: four equally likely sequences.
  double exact = 0;
  for (Index a : {0, 1}) {
    for (Index b : {0, 1}) {
      exact += 0.25 * phi(sgd_step(*p, sgd_step(*p, x0, a, eta), b, eta));
    }
  }
  const ChainConfig c = config(eta, 2, x0, 5);
  const MonteCarloEstimate est = mc_semigroup(c, *p, phi, 40000, 1);
  CHECK(std::abs(est.mean - exact) < 4 * est.standard_error);
  CHECK(est.standard_error > 0);

  const MonteCarloEstimate threaded = mc_semigroup(c, *p, phi, 40000, 3);
  CHECK(threaded.mean == est.mean);
  CHECK(threaded.standard_error == est.standard_error);
}

TEST_CASE("Monte Carlo SGA semigroup against exact enumeration") {
  const DataModel model = circle_model();
  const TestFunction phi = [](const Vector& w) { return w(0) * w(1) + w(0); };
  const Vector w0 = circle_point(1.0);
  double exact = 0;
  for (Index a = 0; a < 3; ++a) {
    for (Index b = 0; b < 3; ++b) {
      exact += phi(sga_step(model, sga_step(model, w0, a, 0.4).vector(), b, 0.4).vector()) / 9.0;
    }
  }
  const MonteCarloEstimate est = mc_semigroup(config(0.4, 2, w0, 8), model, phi, 40000, 2);
  CHECK(std::abs(est.mean - exact) < 4 * est.standard_error);
}

TEST_CASE("interval grid semigroup matches direct evaluation") {
  const auto p = two_well_quadratic();
  const Grid grid = Grid::interval(-4.0, 4.0, 2048);
  auto u = [](double x) { return std::exp(-x * x) * std::cos(x); };
  const GridSemigroup s(grid, *p, 0.1);
  const GridFunction su = s.apply(GridFunction::sample(grid, u));
  double worst = 0;
  for (Index i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i);
    const double direct = 0.5 * u(x - 0.1 * (x - 1.0)) + 0.5 * u(x - 0.15 * (x + 1.0));
    worst = std::max(worst, std::abs(su.values()(i) - direct));
  }
  // Cubic interpolation error at h = 1/256 is a few 1e-10.
  CHECK(worst < 1e-9);
  // Repeated application equals composition.
  const GridFunction u0 = GridFunction::sample(grid, u);
  CHECK((s.apply(u0, 3).values() - s.apply(s.apply(s.apply(u0))).values()).norm() == 0.0);
}

TEST_CASE("displaced points leaving the interval are reported") {
  const auto p = two_well_quadratic();
  CHECK_THROWS_AS(GridSemigroup(Grid::interval(2.0, 4.0, 64), *p, 0.1), OutsideDomain);
}

TEST_CASE("circle grid semigroup matches direct evaluation") {
  const DataModel model = circle_model();
  const Grid grid = Grid::circle(2048);
  auto u = [](double t) { return std::cos(t - 0.3) + 0.5 * std::sin(2 * t + 0.1); };
  const GridFunction su = apply_semigroup(GridFunction::sample(grid, u), model, 0.1);
  double worst = 0;
  for (Index i = 0; i < grid.size(); ++i) {
    double direct = 0;
    for (Index k = 0; k < 3; ++k) {
      const Vector w = sga_step(model, circle_point(grid.node(i)), k, 0.1).vector();
      direct += u(std::atan2(w(1), w(0))) / 3.0;
    }
    worst = std::max(worst, std::abs(su.values()(i) - direct));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("property: grid semigroups are L-infinity contractions") {
  gen::Source src(41);
  const auto p = two_well_quadratic();
  const DataModel model = circle_model();
  const Grid line = Grid::interval(-4.0, 4.0, 1024);
  const Grid circle = Grid::circle(1024);
  const GridSemigroup sl(line, *p, 0.1);
  const GridSemigroup sc(circle, model, 0.1);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector a = src.gaussian(3);
    const Vector f = src.box(3, 0.2, 3.0);
    auto u = [&](double x) { return a(0) * std::sin(f(0) * x) + a(1) * std::cos(f(1) * x) + a(2) * std::sin(x + f(2)); };
    GridFunction gl = GridFunction::sample(line, u);
    GridFunction gc = GridFunction::sample(circle, [&](double t) { return u(std::round(f(0)) * t); });
    for (int n = 0; n < 10; ++n) {
      const GridFunction nl = sl.apply(gl);
      const GridFunction nc = sc.apply(gc);
      CHECK(nl.max_abs() <= gl.max_abs() + 1e-9);
      CHECK(nc.max_abs() <= gc.max_abs() + 1e-9);
      gl = nl;
      gc = nc;
    }
  }
}

TEST_CASE("pushforward matches the closed-form inverse for quadratics") {
  const auto p = two_well_quadratic();
  const Grid grid = Grid::interval(-4.0, 4.0, 4096);
  auto rho = [](double x) { return std::exp(-2 * (x - 0.3) * (x - 0.3)); };
  const double eta = 0.2;
  const GridFunction pushed = pushforward_1d(GridFunction::sample(grid, rho), *p, eta);
  double worst = 0;
  for (Index i = 0; i < grid.size(); ++i) {
    const double y = grid.node(i);
    double expected = 0;
    const double c[2] = {1.0, 1.5};
    const double a[2] = {1.0, -1.0};
    for (int k = 0; k < 2; ++k) {
      const double x = (y - eta * c[k] * a[k]) / (1 - eta * c[k]);
      if (x >= -4.0 && x <= 4.0) {
        expected += 0.5 * rho(x) / (1 - eta * c[k]);
      }
    }
    worst = std::max(worst, std::abs(pushed.values()(i) - expected));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("pushforward rejects non-invertible steps") {
  const auto p = two_well_quadratic();
  const GridFunction rho = GridFunction::sample(Grid::interval(-2.0, 2.0, 64), [](double) { return 1.0; });
  CHECK_THROWS_AS(pushforward_1d(rho, *p, 0.7), InvalidArgument);
}

TEST_CASE("property: duality pairing, mass and positivity of the dual operator") {
  gen::Source src(42);
  Vector tilts(2);
  tilts << 0.3, -0.3;
  const DoubleWell1D well(tilts, Vector::Constant(2, 0.5));
  const auto quad = two_well_quadratic();
  const Grid grid = Grid::interval(-2.0, 2.0, 4096);
  for (int trial = 0; trial < 6; ++trial) {
    const LossProblem& p = trial % 2 == 0 ? static_cast<const LossProblem&>(well) : *quad;
    const double eta = src.uniform(0.01, 0.08);
    const double mean = src.uniform(-0.4, 0.4);
    const double width = src.uniform(0.15, 0.3);
    const GridFunction raw =
        GridFunction::sample(grid, [&](double x) { return std::exp(-0.5 * std::pow((x - mean) / width, 2)); });
    const DensityGrid rho(GridFunction(grid, raw.values() / trapezoid(raw)));
    const DensityGrid pushed = pushforward_density_1d(rho, p, eta);
    CHECK(std::abs(pushed.mass() - 1.0) < 1e-8);
    CHECK(pushed.clamped_mass() <= 1e-9);
    CHECK(pushed.values().minCoeff() >= 0.0);

    const Vector f = src.box(2, 0.5, 3.0);
    const GridFunction u = GridFunction::sample(grid, [&](double x) { return std::sin(f(0) * x) + std::cos(f(1) * x); });
    // <Su, rho> evaluated with Su taken pointwise at the nodes.
    Vector su(grid.size());
    for (Index i = 0; i < grid.size(); ++i) {
      const Vector x = Vector::Constant(1, grid.node(i));
      su(i) = 0;
      for (Index k = 0; k < p.component_count(); ++k) {
        su(i) += p.component_weights()(k) * std::sin(f(0) * sgd_step(p, x, k, eta)(0)) +
                 p.component_weights()(k) * std::cos(f(1) * sgd_step(p, x, k, eta)(0));
      }
    }
    const double left = trapezoid(grid, Vector(su.cwiseProduct(rho.values())));
    const double right = trapezoid(grid, Vector(u.values().cwiseProduct(pushed.values())));
    CHECK(std::abs(left - right) < 1e-6);
  }
}

TEST_CASE("trajectory csv") {
  Trajectory t = {Vector::Constant(2, 0.5), Vector::Constant(2, 1.0 / 3.0)};
  std::ostringstream out;
  write_trajectory_csv(out, t);
  CHECK(out.str() == "step,x1,x2\n0,0.5,0.5\n1,0.33333333333333331,0.33333333333333331\n");
}
