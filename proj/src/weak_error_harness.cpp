#include "sgdlab/weak_error_harness.hpp"

#include "sgdlab/errors.hpp"
#include "sgdlab/grid.hpp"
#include "sgdlab/kolmogorov_oracle.hpp"
#include "sgdlab/parallel.hpp"
#include "sgdlab/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <ostream>

namespace sgdlab {
namespace {

using json = nlohmann::ordered_json;

constexpr double kContractionTolerance = 1e-9;
constexpr double kMassTolerance = 1e-8;
constexpr double kClampTolerance = 1e-9;
constexpr double kDualityTolerance = 1e-6;
constexpr double kNormTolerance = 1e-12;

// Two-sided 97.5% Student t quantiles for 1..10 degrees of freedom.
double t_quantile(Index dof) {
  static constexpr std::array<double, 10> table = {12.706, 4.303, 3.182, 2.776, 2.571,
                                                   2.447,  2.365, 2.306, 2.262, 2.228};
  if (dof >= 1 && dof <= 10) {
    return table[static_cast<std::size_t>(dof - 1)];
  }
  // Cornish-Fisher first correction to the normal quantile.
  const double z = 1.959964;
  return z + (z * z * z + z) / (4.0 * static_cast<double>(dof));
}

std::string format_double(double v, const char* fmt = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string to_string(Space space) { return space == Space::Line ? "line" : "circle"; }

std::string to_string(EvaluationMode mode) {
  return mode == EvaluationMode::Grid ? "grid" : "monte_carlo";
}

std::string to_string(OracleMode mode) { return mode == OracleMode::Pde ? "pde" : "fine_sde"; }

std::vector<std::string> test_function_names(Space space) {
  if (space == Space::Line) {
    return {"gaussian", "bump", "cosine"};
  }
  return {"harmonic", "cos"};
}

TestFunction make_test_function(const std::string& id, Space space) {
  if (space == Space::Line) {
    if (id == "gaussian") {
      return [](const Vector& x) { return std::exp(-2.0 * (x.array() - 0.5).square().sum()); };
    }
    if (id == "bump") {
      return [](const Vector& x) { return smooth_bump(x.norm(), 0.0, 0.5); };
    }
    if (id == "cosine") {
      return [](const Vector& x) { return std::cos(x.sum()); };
    }
  } else {
    if (id == "harmonic") {
      // cos(theta - 0.3) + 1/2 sin(2 theta + 0.1) written as a polynomial in
      // w / |w| so that it is smooth on every sphere.
      return [](const Vector& x) {
        const Vector w = x / x.norm();
        const double c = w(0) * std::cos(0.3) + w(1) * std::sin(0.3);
        const double s2 = 2.0 * w(0) * w(1) * std::cos(0.1) + (w(0) * w(0) - w(1) * w(1)) * std::sin(0.1);
        return c + 0.5 * s2;
      };
    }
    if (id == "cos") {
      return [](const Vector& x) { return x(0) / x.norm(); };
    }
  }
  throw ConfigError("weak_error_harness: unknown test function '" + id + "' for the " + to_string(space));
}

double smooth_bump(double x, double center, double radius) {
  const double s = (x - center) / radius;
  if (std::abs(s) >= 1.0) {
    return 0.0;
  }
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

std::function<double(double)> random_smooth_function(std::uint64_t seed, Index i, double lower,
                                                     double upper) {
  CounterRng rng(seed, 0x70000000ULL + static_cast<std::uint64_t>(i));
  constexpr int kModes = 3;
  std::array<double, kModes + 1> a{};
  std::array<double, kModes + 1> b{};
  for (int m = 0; m <= kModes; ++m) {
    const double damp = 1.0 / static_cast<double>((m + 1) * (m + 1));
    a[static_cast<std::size_t>(m)] = (2.0 * uniform01(rng) - 1.0) * damp;
    b[static_cast<std::size_t>(m)] = (2.0 * uniform01(rng) - 1.0) * damp;
  }
  const double k = 2.0 * std::numbers::pi / (upper - lower);
  return [a, b, k, lower](double x) {
    double v = a[0];
    for (int m = 1; m <= kModes; ++m) {
      const double phase = k * m * (x - lower);
      v += a[static_cast<std::size_t>(m)] * std::cos(phase) + b[static_cast<std::size_t>(m)] * std::sin(phase);
    }
    return v;
  };
}

// ---------------------------------------------------------------------------

Index step_count(double horizon, double eta) {
  return static_cast<Index>(std::llround(horizon / eta));
}

void ExperimentPlan::validate() const {
  if (order != 1 && order != 2) {
    throw InvalidArgument("weak_error_harness: order must be 1 or 2");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidArgument("weak_error_harness: horizon must be positive");
  }
  if (ladder.size() < 4) {
    throw InvalidArgument("weak_error_harness: the eta ladder needs at least 4 points");
  }
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0) || !std::isfinite(ladder[i])) {
      throw InvalidArgument("weak_error_harness: ladder entries must be positive");
    }
    if (i > 0 && std::abs(ladder[i - 1] / ladder[i] - 2.0) > 2e-9) {
      throw InvalidArgument("weak_error_harness: consecutive ladder entries must halve");
    }
    if (step_count(horizon, ladder[i]) < 1) {
      throw InvalidArgument("weak_error_harness: eta " + std::to_string(ladder[i]) + " exceeds the horizon");
    }
  }
  make_test_function(test_function, space);
  if (space == Space::Line) {
    if (!problem) {
      throw InvalidArgument("weak_error_harness: line experiments need a loss problem");
    }
  } else if (!model) {
    throw InvalidArgument("weak_error_harness: circle experiments need a data model");
  }
  if (evaluation == EvaluationMode::Grid) {
    if (oracle != OracleMode::Pde) {
      throw InvalidArgument("weak_error_harness: grid evaluation is paired with the PDE oracle");
    }
    if (space == Space::Line && problem->dimension() != 1) {
      throw InvalidArgument("weak_error_harness: grid experiments on the line need d = 1");
    }
    if (space == Space::Circle && model->dimension() != 2) {
      throw InvalidArgument("weak_error_harness: grid experiments on the circle need d = 2");
    }
    if (grid_nodes < kMinGridCells) {
      throw InvalidArgument("weak_error_harness: grid_nodes below " + std::to_string(kMinGridCells));
    }
    if (!(upper > lower)) {
      throw InvalidArgument("weak_error_harness: need lower < upper");
    }
    if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
      throw InvalidArgument("weak_error_harness: window_fraction must lie in (0, 1]");
    }
  } else {
    if (oracle != OracleMode::FineSde) {
      throw InvalidArgument("weak_error_harness: Monte Carlo evaluation is paired with the fine-SDE oracle");
    }
    if (samples < 2) {
      throw InvalidArgument("weak_error_harness: need at least 2 Monte Carlo samples");
    }
    if (!(substep_fraction > 0.0 && substep_fraction <= 0.05)) {
      throw InvalidArgument("weak_error_harness: substep_fraction must lie in (0, 1/20]");
    }
    const Index d = space == Space::Line ? problem->dimension() : model->dimension();
    if (start.size() != d) {
      throw InvalidArgument("weak_error_harness: start point must have dimension " + std::to_string(d));
    }
  }
}

SlopeFit fit_slope(std::span<const double> eta, std::span<const double> error) {
  if (eta.size() != error.size()) {
    throw InvalidArgument("weak_error_harness: fit needs as many errors as step sizes");
  }
  const Index n = static_cast<Index>(eta.size());
  if (n < 3) {
    throw InvalidArgument("weak_error_harness: fit needs at least 3 points");
  }
  Vector lx(n);
  Vector ly(n);
  for (Index i = 0; i < n; ++i) {
    if (!(eta[i] > 0.0) || !(error[i] > 0.0) || !std::isfinite(error[i])) {
      throw InvalidArgument("weak_error_harness: fit needs positive finite errors, got " +
                            std::to_string(error[i]) + " at eta " + std::to_string(eta[i]));
    }
    lx(i) = std::log(eta[i]);
    ly(i) = std::log(error[i]);
  }
  const double mx = lx.mean();
  const double my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  if (!(sxx > 0.0)) {
    throw InvalidArgument("weak_error_harness: fit needs distinct step sizes");
  }
  SlopeFit fit;
  fit.points = n;
  fit.slope = ((lx.array() - mx) * (ly.array() - my)).sum() / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ssr = (ly.array() - fit.intercept - fit.slope * lx.array()).square().sum();
  fit.residual = std::sqrt(ssr / static_cast<double>(n));
  const double half = t_quantile(n - 2) * std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  fit.ci_low = fit.slope - half;
  fit.ci_high = fit.slope + half;
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

struct GridContext {
  Grid grid;
  GridFunction phi;
  std::vector<Index> window;
};

GridContext make_grid_context(const ExperimentPlan& plan, WeakErrorReport& report) {
  const TestFunction phi = make_test_function(plan.test_function, plan.space);
  if (plan.space == Space::Line) {
    const Grid grid = Grid::interval(plan.lower, plan.upper, plan.grid_nodes);
    const double mid = 0.5 * (plan.lower + plan.upper);
    const double half = 0.5 * plan.window_fraction * (plan.upper - plan.lower);
    report.window_lower = mid - half;
    report.window_upper = mid + half;
    std::vector<Index> window;
    for (Index i = 0; i < grid.size(); ++i) {
      if (std::abs(grid.node(i) - mid) <= half * (1.0 + 1e-12)) {
        window.push_back(i);
      }
    }
    return {grid, GridFunction::sample(grid, [&](double x) { return phi(Vector::Constant(1, x)); }), window};
  }
  const Grid grid = Grid::circle(plan.grid_nodes);
  report.window_lower = 0.0;
  report.window_upper = 2.0 * std::numbers::pi;
  std::vector<Index> window(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) {
    window[static_cast<std::size_t>(i)] = i;
  }
  return {grid, GridFunction::sample(grid, [&](double t) { return phi(circle_point(t)); }), window};
}

WeakErrorPoint grid_point(const ExperimentPlan& plan, const GridContext& ctx, double eta) {
  WeakErrorPoint point;
  point.eta = eta;
  point.steps = step_count(plan.horizon, eta);
  const double time = static_cast<double>(point.steps) * eta;

  std::optional<GridFunction> chain;
  std::optional<ParabolicProblem> pde;
  if (plan.space == Space::Line) {
    chain = GridSemigroup(ctx.grid, *plan.problem, eta).apply(ctx.phi, point.steps);
    pde = reduce_to_line(build_spec(plan.problem, plan.order, eta, plan.noise), ctx.phi, time);
  } else {
    chain = GridSemigroup(ctx.grid, *plan.model, eta).apply(ctx.phi, point.steps);
    pde = reduce_to_circle(build_spec(plan.model, plan.order, eta, plan.sphere_options), ctx.phi, time);
  }
  // Time steps with dt <= dx to start with; doubled until the self-check passes.
  const Index initial_steps = std::max<Index>(16, static_cast<Index>(std::ceil(time / ctx.grid.spacing())));
  const OracleSolution oracle = solve_backward_refined(*pde, initial_steps, plan.max_time_steps);
  point.oracle_check = oracle.self_check;
  point.oracle_time_steps = oracle.time_steps;

  double err = 0.0;
  for (Index i : ctx.window) {
    err = std::max(err, std::abs(chain->values()(i) - oracle.solution.values()(i)));
  }
  point.error = err;
  point.floor = !(err > 10.0 * oracle.self_check);
  return point;
}

MonteCarloEstimate sde_expectation(const ExperimentPlan& plan, double eta, double time, const TestFunction& phi,
                                   int jobs) {
  const double substep = plan.substep_fraction * eta;
  const std::uint64_t seed = mix64(plan.seed ^ 0x5de5de5de5de5deULL);
  std::vector<double> values(static_cast<std::size_t>(plan.samples));
  if (plan.space == Space::Line) {
    const EuclideanSpec spec = build_spec(plan.problem, plan.order, eta, plan.noise);
    parallel_for(plan.samples, jobs, [&](Index s) {
      values[static_cast<std::size_t>(s)] =
          phi(euler_maruyama_terminal(spec, plan.start, time, substep, seed, static_cast<std::uint64_t>(s)));
    });
  } else {
    const SphereSpec spec = build_spec(plan.model, plan.order, eta, plan.sphere_options);
    parallel_for(plan.samples, jobs, [&](Index s) {
      values[static_cast<std::size_t>(s)] =
          phi(integrate_sphere_terminal(spec, plan.start, time, substep, seed, static_cast<std::uint64_t>(s)));
    });
  }
  MonteCarloEstimate est;
  est.samples = plan.samples;
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  est.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) {
    ss += (v - est.mean) * (v - est.mean);
  }
  const double n = static_cast<double>(values.size());
  est.standard_error = std::sqrt(ss / (n - 1.0) / n);
  return est;
}

WeakErrorPoint monte_carlo_point(const ExperimentPlan& plan, double eta, int jobs) {
  const TestFunction phi = make_test_function(plan.test_function, plan.space);
  WeakErrorPoint point;
  point.eta = eta;
  point.steps = step_count(plan.horizon, eta);
  const double time = static_cast<double>(point.steps) * eta;
  ChainConfig config{eta, point.steps, plan.seed, plan.start};
  const MonteCarloEstimate chain = plan.space == Space::Line
                                       ? mc_semigroup(config, *plan.problem, phi, plan.samples, jobs)
                                       : mc_semigroup(config, *plan.model, phi, plan.samples, jobs);
  const MonteCarloEstimate sde = sde_expectation(plan, eta, time, phi, jobs);
  point.error = std::abs(chain.mean - sde.mean);
  point.standard_error = std::hypot(chain.standard_error, sde.standard_error);
  // Differences within three standard errors are statistical noise.
  point.floor = !(point.error > 3.0 * point.standard_error);
  return point;
}

}  // namespace

WeakErrorReport run_weak_error(const ExperimentPlan& plan, int jobs) {
  plan.validate();
  const auto started = std::chrono::steady_clock::now();

  WeakErrorReport report;
  report.space = plan.space;
  report.order = plan.order;
  report.horizon = plan.horizon;
  report.test_function = plan.test_function;
  report.evaluation = plan.evaluation;
  report.oracle = plan.oracle;
  report.seed = plan.seed;
  report.points.resize(plan.ladder.size());

  const Index count = static_cast<Index>(plan.ladder.size());
  if (plan.evaluation == EvaluationMode::Grid) {
    report.grid_nodes = plan.grid_nodes;
    const GridContext ctx = make_grid_context(plan, report);
    parallel_for(count, jobs, [&](Index i) {
      report.points[static_cast<std::size_t>(i)] = grid_point(plan, ctx, plan.ladder[static_cast<std::size_t>(i)]);
    });
  } else {
    for (Index i = 0; i < count; ++i) {
      report.points[static_cast<std::size_t>(i)] =
          monte_carlo_point(plan, plan.ladder[static_cast<std::size_t>(i)], jobs);
    }
  }

  std::vector<double> etas;
  std::vector<double> errors;
  for (const WeakErrorPoint& p : report.points) {
    if (p.floor) {
      report.warnings.push_back("floor reached at eta " + format_double(p.eta) + ": error " +
                                format_double(p.error) + " is not resolved above the oracle error; excluded from the fit");
    } else {
      etas.push_back(p.eta);
      errors.push_back(p.error);
    }
  }
  if (etas.size() >= 3) {
    report.fit = fit_slope(etas, errors);
  } else {
    report.warnings.push_back("fewer than 3 points above the floor; no slope fitted");
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

void write_json(std::ostream& out, const WeakErrorReport& report) {
  json j;
  j["space"] = to_string(report.space);
  j["order"] = report.order;
  j["horizon"] = report.horizon;
  j["test_function"] = report.test_function;
  j["evaluation"] = to_string(report.evaluation);
  j["oracle"] = to_string(report.oracle);
  j["seed"] = report.seed;
  if (report.evaluation == EvaluationMode::Grid) {
    j["grid_nodes"] = report.grid_nodes;
    j["window"] = {report.window_lower, report.window_upper};
  }
  json points = json::array();
  for (const WeakErrorPoint& p : report.points) {
    json e;
    e["eta"] = p.eta;
    e["steps"] = p.steps;
    e["error"] = p.error;
    if (report.evaluation == EvaluationMode::Grid) {
      e["oracle_check"] = p.oracle_check;
      e["oracle_time_steps"] = p.oracle_time_steps;
    } else {
      e["standard_error"] = p.standard_error;
    }
    e["floor"] = p.floor;
    points.push_back(e);
  }
  j["points"] = points;
  if (report.fit) {
    j["fit"] = {{"slope", report.fit->slope},
                {"intercept", report.fit->intercept},
                {"residual", report.fit->residual},
                {"ci95", {number_or_null(report.fit->ci_low), number_or_null(report.fit->ci_high)}},
                {"points", report.fit->points}};
  } else {
    j["fit"] = nullptr;
  }
  j["warnings"] = report.warnings;
  out << j.dump(2) << '\n';
}

void write_text(std::ostream& out, const WeakErrorReport& report) {
  out << "weak error, " << to_string(report.space) << ", order " << report.order << ", T = "
      << format_double(report.horizon) << ", phi = " << report.test_function << " ("
      << to_string(report.evaluation) << " vs " << to_string(report.oracle) << ")\n";
  if (report.evaluation == EvaluationMode::Grid) {
    out << "sup norm over [" << format_double(report.window_lower) << ", "
        << format_double(report.window_upper) << "], " << report.grid_nodes << " grid cells\n";
  }
  char line[160];
  std::snprintf(line, sizeof line, "%12s %8s %14s %14s %6s\n", "eta", "steps", "error",
                report.evaluation == EvaluationMode::Grid ? "oracle_check" : "std_error", "floor");
  out << line;
  for (const WeakErrorPoint& p : report.points) {
    std::snprintf(line, sizeof line, "%12.6g %8lld %14.6e %14.6e %6s\n", p.eta, static_cast<long long>(p.steps),
                  p.error, report.evaluation == EvaluationMode::Grid ? p.oracle_check : p.standard_error,
                  p.floor ? "yes" : "no");
    out << line;
  }
  if (report.fit) {
    std::snprintf(line, sizeof line, "slope %.4f  95%% CI [%.4f, %.4f]  residual %.4f  (%lld points)\n",
                  report.fit->slope, report.fit->ci_low, report.fit->ci_high, report.fit->residual,
                  static_cast<long long>(report.fit->points));
    out << line;
  } else {
    out << "slope not fitted\n";
  }
  for (const std::string& w : report.warnings) {
    out << "warning: " << w << '\n';
  }
}

void write_csv(std::ostream& out, const WeakErrorReport& report) {
  const auto old_precision = out.precision(17);
  out << "eta,error\n";
  for (const WeakErrorPoint& p : report.points) {
    out << p.eta << ',' << p.error << '\n';
  }
  out.precision(old_precision);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<DecayRow> decay_rows(std::span<const double> ladder, const std::function<double(double)>& remainder) {
  std::vector<DecayRow> rows;
  for (double eta : ladder) {
    DecayRow row;
    row.eta = eta;
    row.remainder = remainder(eta);
    if (!rows.empty() && row.remainder > 0.0) {
      row.ratio = rows.back().remainder / row.remainder;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<DecayRow> taylor_remainder_study(const ScalarField<double>& u, const Vector& w, const Vector& v,
                                             std::span<const double> ladder) {
  const Vector unit = SpherePoint<double>(w).vector();
  return decay_rows(ladder, [&](double eta) {
    return std::abs(taylor_expand_normalized(u, unit, v, eta).remainder());
  });
}

std::vector<DecayRow> sga_one_step_study(const DataModel& model, const ScalarField<double>& u, const Vector& w,
                                         std::span<const double> ladder) {
  const Vector unit = SpherePoint<double>(w).vector();
  const Vector grad_u = spherical_gradient(u, unit);
  const Matrix hess_u = spherical_hessian(u, unit);
  const Matrix m = fourth_moment_contraction(model, unit);
  const double base = u.value(unit);
  const double first = pca_spherical_gradient(model, unit).dot(grad_u);
  const double second = 0.5 * (m.cwiseProduct(hess_u).sum() - unit.dot(m * grad_u));
  return decay_rows(ladder, [&](double eta) {
    double expected = 0.0;
    for (Index k = 0; k < model.atom_count(); ++k) {
      expected += model.probabilities()(k) * u.value(sga_step(model, unit, k, eta).vector());
    }
    return std::abs(expected - base - eta * first - eta * eta * second);
  });
}

std::vector<TaylorCase> taylor_study(std::span<const Index> dimensions, Index pairs, std::span<const double> ladder,
                                     std::uint64_t seed) {
  std::vector<TaylorCase> cases;
  for (const Index d : dimensions) {
    for (Index pair = 0; pair < pairs; ++pair) {
      CounterRng rng(seed, 0x7a000000ULL + static_cast<std::uint64_t>(d) * 0x10000ULL + static_cast<std::uint64_t>(pair));
      std::normal_distribution<double> normal;
      auto draw = [&](Index n) {
        Vector x(n);
        for (Index i = 0; i < n; ++i) {
          x(i) = normal(rng);
        }
        return x;
      };
      const Vector c = draw(d) / std::sqrt(static_cast<double>(d));
      const Matrix b = Eigen::Map<const Matrix>(draw(d * d).data(), d, d);
      const Matrix a = 0.5 * (b + b.transpose());
      const ScalarField<double> u = exponential_field<double>(c) + quadratic_field<double>(a);
      const Vector w = draw(d).normalized();
      const Vector v = draw(d);
      cases.push_back({d, pair, false, taylor_remainder_study(u, w, v, ladder)});
      cases.push_back({d, pair, true, taylor_remainder_study(u, w, 0.7 * w, ladder)});
    }
  }
  return cases;
}

void write_json(std::ostream& out, const std::vector<TaylorCase>& cases) {
  json j = json::array();
  for (const TaylorCase& c : cases) {
    json rows = json::array();
    for (const DecayRow& r : c.rows) {
      rows.push_back({{"eta", r.eta}, {"remainder", r.remainder}, {"ratio", number_or_null(r.ratio)}});
    }
    j.push_back({{"dimension", c.dimension}, {"pair", c.pair}, {"radial", c.radial}, {"rows", rows}});
  }
  out << json{{"taylor_study", j}}.dump(2) << "\n";
}

void write_csv(std::ostream& out, const std::vector<TaylorCase>& cases) {
  out << "dimension,pair,radial,eta,remainder,ratio\n";
  for (const TaylorCase& c : cases) {
    for (const DecayRow& r : c.rows) {
      out << c.dimension << ',' << c.pair << ',' << (c.radial ? 1 : 0) << ',' << format_double(r.eta, "%.17g") << ','
          << format_double(r.remainder, "%.17g") << ',' << format_double(r.ratio, "%.17g") << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

bool SuiteReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const SuiteRow& r) { return !r.within_hypotheses || r.passed; });
}

SuiteSettings default_suite_settings(std::uint64_t seed) {
  SuiteSettings s;
  s.seed = seed;

  s.line_problem = std::make_shared<FiniteSumQuadratic>(
      std::vector<Vector>{Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)},
      std::vector<Matrix>{Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.5)}, Vector::Constant(2, 0.5));

  Matrix atoms(2, 3);
  atoms << 1.0, -0.6, -0.4, 0.2, 0.7, -0.9;
  s.circle_model = std::make_shared<DataModel>(atoms, Vector::Constant(3, 1.0 / 3.0));

  s.speed_problem = std::make_shared<ConfiningFamily>(
      std::vector<Vector>{Vector::Constant(1, -0.3), Vector::Constant(1, 0.3)}, 1.0, Vector::Constant(2, 0.5));

  Vector a1(2);
  Vector a2(2);
  Vector a3(2);
  a1 << 0.5, 0.0;
  a2 << -0.25, 0.4;
  a3 << -0.2, -0.45;
  s.confining = std::make_shared<ConfiningFamily>(std::vector<Vector>{a1, a2, a3}, 1.0, Vector::Constant(3, 1.0 / 3.0));

  Vector tilts(2);
  tilts << 0.3, -0.3;
  s.density_problem = std::make_shared<DoubleWell1D>(tilts, Vector::Constant(2, 0.5));
  return s;
}

namespace {

template <typename Semigroup>
SuiteRow contraction_row(const std::string& name, const Semigroup& semigroup, const SuiteSettings& s, Index steps,
                         int jobs) {
  const Grid& grid = semigroup.grid();
  std::vector<double> margins(static_cast<std::size_t>(s.random_functions));
  parallel_for(s.random_functions, jobs, [&](Index f) {
    const auto phi = random_smooth_function(s.seed, f, grid.lower(), grid.upper());
    GridFunction u = GridFunction::sample(grid, phi);
    double margin = std::numeric_limits<double>::infinity();
    for (Index n = 0; n < steps; ++n) {
      GridFunction next = semigroup.apply(u);
      margin = std::min(margin, u.max_abs() - next.max_abs());
      u = std::move(next);
    }
    margins[static_cast<std::size_t>(f)] = margin;
  });
  SuiteRow row;
  row.name = name;
  row.margin = *std::min_element(margins.begin(), margins.end());
  row.passed = row.margin >= -kContractionTolerance;
  row.note = std::to_string(s.random_functions) + " random functions x " + std::to_string(steps) +
             " applications; margin = min(max|u| - max|Su|)";
  return row;
}

std::vector<SuiteRow> finite_speed_rows(const SuiteSettings& s, double lower, double upper, Index cells) {
  const ConfiningFamily& problem = *s.speed_problem;
  const Grid grid = Grid::interval(lower, upper, cells);
  const double eta = s.eta;
  const Index n = s.speed_steps;
  const double c = problem.gradient_bound();
  constexpr double kSupport = 0.5;
  const GridFunction phi = GridFunction::sample(grid, [](double x) { return smooth_bump(x, 0.0, kSupport); });
  const GridFunction u = GridSemigroup(grid, problem, eta).apply(phi, n);

  // The cubic stencil reaches up to two cells beyond the displaced point.
  const double reach = static_cast<double>(n) * (c * eta + 2.0 * grid.spacing());
  SuiteRow grid_row;
  grid_row.name = "finite_speed_grid";
  grid_row.margin = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (Index i = 0; i < grid.size(); ++i) {
    const double dist = std::max(0.0, std::abs(grid.node(i)) - kSupport);
    if (dist > reach) {
      worst = std::max(worst, std::abs(u.values()(i)));
    } else if (u.values()(i) != 0.0) {
      grid_row.margin = std::min(grid_row.margin, reach - dist);
    }
  }
  grid_row.passed = worst == 0.0;
  grid_row.note = "nodes beyond n (C eta + 2 h) = " + format_double(reach) +
                  " of supp phi are exactly zero (largest value there " + format_double(worst) + ")";

  // Literal bound for the chain itself, by enumerating every atom sequence.
  const Index branches = problem.component_count();
  Index sequences = 1;
  for (Index j = 0; j < n; ++j) {
    sequences *= branches;
  }
  SuiteRow exact;
  exact.name = "finite_speed_exact";
  const double literal = static_cast<double>(n) * c * eta;
  double closest = std::numeric_limits<double>::infinity();
  Index hits = 0;
  Vector x(1);
  for (Index i = 0; i < grid.size(); i += 8) {
    const double x0 = grid.node(i);
    if (std::abs(x0) - kSupport <= literal) {
      continue;
    }
    for (Index seq = 0; seq < sequences; ++seq) {
      x(0) = x0;
      Index code = seq;
      for (Index j = 0; j < n; ++j) {
        x = sgd_step(problem, x, code % branches, eta);
        code /= branches;
      }
      closest = std::min(closest, std::abs(x(0)) - kSupport);
      if (std::abs(x(0)) < kSupport) {
        ++hits;
      }
    }
  }
  exact.passed = hits == 0;
  exact.margin = closest;
  exact.note = "starts farther than n C eta = " + format_double(literal) +
               " from supp phi never reach it over all atom sequences";
  return {grid_row, exact};
}

SuiteRow confinement_row(const SuiteSettings& s, int jobs) {
  const ConfiningFamily& problem = *s.confining;
  const double c = problem.gradient_bound();
  const double delta = problem.radial_margin(s.radius);
  const double threshold = problem.step_threshold(s.radius);
  const double eta = s.confinement_eta;
  const double bound = s.radius + c * eta;
  const Index d = problem.dimension();

  std::vector<double> largest(static_cast<std::size_t>(s.trajectories));
  parallel_for(s.trajectories, jobs, [&](Index t) {
    CounterRng rng(s.seed, 0x60000000ULL + static_cast<std::uint64_t>(t));
    // Uniform start in the closed ball of radius R.
    Vector x(d);
    do {
      for (Index i = 0; i < d; ++i) {
        x(i) = s.radius * (2.0 * uniform01(rng) - 1.0);
      }
    } while (x.norm() > s.radius);
    AtomStream atoms(problem.component_weights(), s.seed, static_cast<std::uint64_t>(t));
    double worst = x.norm();
    for (Index n = 0; n < s.confinement_steps; ++n) {
      x.noalias() -= eta * problem.gradient(x, atoms.next());
      worst = std::max(worst, x.norm());
    }
    largest[static_cast<std::size_t>(t)] = worst;
  });
  const double worst = *std::max_element(largest.begin(), largest.end());

  SuiteRow row;
  row.name = "mass_confinement";
  row.within_hypotheses = eta < threshold;
  row.margin = bound - worst;
  row.passed = worst <= bound;
  row.note = std::to_string(s.trajectories) + " trajectories x " + std::to_string(s.confinement_steps) +
             " steps, R = " + format_double(s.radius) + ", C = " + format_double(c) + ", delta = " +
             format_double(delta) + ", largest |x_n| = " + format_double(worst, "%.12g") + " vs R + C eta = " +
             format_double(bound, "%.12g");
  if (!row.within_hypotheses) {
    row.note += "; outside hypotheses: eta >= 2 delta R / C^2 = " + format_double(threshold);
  }
  return row;
}

std::vector<SuiteRow> dual_rows(const SuiteSettings& s) {
  const LossProblem& problem = *s.density_problem;
  const Grid grid = Grid::interval(s.density_lower, s.density_upper, s.density_cells);
  const double eta = s.density_eta;

  const GridFunction raw = GridFunction::sample(grid, [](double x) { return std::exp(-0.5 * std::pow((x - 0.3) / 0.3, 2)); });
  const double raw_mass = trapezoid(grid, raw.values());
  const DensityGrid rho(GridFunction(grid, raw.values() / raw_mass));
  const DensityGrid pushed = pushforward_density_1d(rho, problem, eta);

  std::vector<SuiteRow> rows;
  SuiteRow mass;
  mass.name = "dual_mass";
  mass.margin = kMassTolerance - std::abs(pushed.mass() - rho.mass());
  mass.passed = mass.margin >= 0.0;
  mass.note = "mass " + format_double(rho.mass(), "%.15g") + " -> " + format_double(pushed.mass(), "%.15g");
  rows.push_back(mass);

  SuiteRow positivity;
  positivity.name = "dual_positivity";
  positivity.margin = kClampTolerance * rho.mass() - pushed.clamped_mass();
  positivity.passed = positivity.margin >= 0.0;
  positivity.note = "clamped mass " + format_double(pushed.clamped_mass());
  rows.push_back(positivity);

  // Signed density: smooth random profile under a Gaussian envelope.
  const auto profile = random_smooth_function(s.seed, 1000, s.density_lower, s.density_upper);
  const GridFunction signed_rho = GridFunction::sample(grid, [&](double x) { return profile(x) * std::exp(-4.0 * x * x); });
  const GridFunction signed_pushed = pushforward_1d(signed_rho, problem, eta);
  const double l1_before = trapezoid(grid, signed_rho.values().cwiseAbs());
  const double l1_after = trapezoid(grid, signed_pushed.values().cwiseAbs());
  SuiteRow l1;
  l1.name = "dual_l1_contraction";
  l1.margin = l1_before + kMassTolerance - l1_after;
  l1.passed = l1.margin >= 0.0;
  l1.note = "L1 norm " + format_double(l1_before, "%.12g") + " -> " + format_double(l1_after, "%.12g");
  rows.push_back(l1);

  const GridFunction u = GridFunction::sample(grid, random_smooth_function(s.seed, 1001, s.density_lower, s.density_upper));
  const GridFunction su = GridSemigroup(grid, problem, eta).apply(u);
  const double left = trapezoid(grid, su.values().cwiseProduct(rho.density().values()));
  const double right = trapezoid(grid, u.values().cwiseProduct(pushed.density().values()));
  SuiteRow duality;
  duality.name = "duality_pairing";
  duality.margin = kDualityTolerance - std::abs(left - right);
  duality.passed = duality.margin >= 0.0;
  duality.note = "<Su, rho> = " + format_double(left, "%.12g") + ", <u, S* rho> = " + format_double(right, "%.12g");
  rows.push_back(duality);
  return rows;
}

SuiteRow sga_norm_row(const SuiteSettings& s) {
  const DataModel& model = *s.circle_model;
  double worst = 0.0;
  for (Index t = 0; t < 100; ++t) {
    ChainConfig config{s.eta, 1000, s.seed, circle_point(0.1 * static_cast<double>(t))};
    for (const Vector& w : run_chain(config, model, static_cast<std::uint64_t>(t))) {
      worst = std::max(worst, std::abs(w.norm() - 1.0));
    }
  }
  SuiteRow row;
  row.name = "sga_norm";
  row.margin = kNormTolerance - worst;
  row.passed = row.margin >= 0.0;
  row.note = "largest ||w| - 1| over 100 x 1000 SGA steps: " + format_double(worst);
  return row;
}

}  // namespace

SuiteReport contraction_and_confinement_suite(const SuiteSettings& s, int jobs) {
  if (!s.line_problem || !s.circle_model || !s.speed_problem || !s.confining || !s.density_problem) {
    throw InvalidArgument("weak_error_harness: suite settings are missing a problem");
  }
  const Index steps = step_count(s.horizon, s.eta);
  SuiteReport report;
  report.rows.push_back(contraction_row("linf_contraction_sgd",
                                        GridSemigroup(Grid::interval(s.lower, s.upper, s.line_cells), *s.line_problem, s.eta),
                                        s, steps, jobs));
  report.rows.push_back(contraction_row("linf_contraction_sga",
                                        GridSemigroup(Grid::circle(s.circle_nodes), *s.circle_model, s.eta), s, steps, jobs));
  for (SuiteRow& row : finite_speed_rows(s, s.lower, s.upper, s.line_cells)) {
    report.rows.push_back(std::move(row));
  }
  report.rows.push_back(confinement_row(s, jobs));
  for (SuiteRow& row : dual_rows(s)) {
    report.rows.push_back(std::move(row));
  }
  report.rows.push_back(sga_norm_row(s));
  return report;
}

void write_json(std::ostream& out, const SuiteReport& report) {
  json rows = json::array();
  for (const SuiteRow& r : report.rows) {
    rows.push_back({{"name", r.name},
                    {"within_hypotheses", r.within_hypotheses},
                    {"passed", r.within_hypotheses ? json(r.passed) : json(nullptr)},
                    {"margin", number_or_null(r.margin)},
                    {"note", r.note}});
  }
  json j;
  j["passed"] = report.passed();
  j["rows"] = rows;
  out << j.dump(2) << '\n';
}

void write_text(std::ostream& out, const SuiteReport& report) {
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %-8s %14s  %s\n", "check", "result", "margin", "note");
  out << line;
  for (const SuiteRow& r : report.rows) {
    const char* result = !r.within_hypotheses ? "n/a" : (r.passed ? "pass" : "FAIL");
    std::snprintf(line, sizeof line, "%-22s %-8s %14.6e  ", r.name.c_str(), result, r.margin);
    out << line << r.note << '\n';
  }
}

// ---------------------------------------------------------------------------

BrownianStatistic spherical_brownian_statistic(Index dimension, double eta, double time, Index paths,
                                               double substep, std::uint64_t seed, int jobs) {
  if (paths < 2) {
    throw InvalidArgument("weak_error_harness: need at least 2 paths");
  }
  Vector w0 = Vector::Zero(dimension);
  w0(0) = 1.0;
  std::vector<double> values(static_cast<std::size_t>(paths));
  parallel_for(paths, jobs, [&](Index p) {
    values[static_cast<std::size_t>(p)] =
        spherical_bm_terminal(w0, eta, time, substep, seed, static_cast<std::uint64_t>(p)).dot(w0);
  });
  BrownianStatistic stat;
  stat.paths = paths;
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  stat.mean = sum / static_cast<double>(paths);
  double ss = 0.0;
  for (double v : values) {
    ss += (v - stat.mean) * (v - stat.mean);
  }
  stat.standard_error = std::sqrt(ss / static_cast<double>(paths - 1) / static_cast<double>(paths));
  stat.expected = std::exp(-0.5 * static_cast<double>(dimension - 1) * eta * time);
  return stat;
}

}  // namespace sgdlab
