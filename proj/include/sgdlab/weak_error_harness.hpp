#pragma once

// Weak-error experiments: the discrete semigroup u^n against the diffusion's
// u(., n eta) over a ladder of step sizes, log-log slope fits, the Taylor
// remainder study on the sphere, the chain invariant suite and the spherical
// Brownian motion statistic.

#include "sgdlab/discrete_chains.hpp"
#include "sgdlab/problems.hpp"
#include "sgdlab/sde_engine.hpp"
#include "sgdlab/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sgdlab {

enum class Space { Line, Circle };
enum class EvaluationMode { Grid, MonteCarlo };
enum class OracleMode { Pde, FineSde };

std::string to_string(Space space);
std::string to_string(EvaluationMode mode);
std::string to_string(OracleMode mode);

/// Test functions by name. Line: "gaussian", "bump", "cosine". Circle (and
/// the sphere in general): "harmonic", "cos". Throws ConfigError for unknown names.
TestFunction make_test_function(const std::string& id, Space space);
std::vector<std::string> test_function_names(Space space);

struct ExperimentPlan {
  Space space = Space::Line;
  LossProblemPtr problem;  ///< line experiments
  DataModelPtr model;      ///< circle experiments
  int order = 1;
  std::vector<double> ladder = {0.2, 0.1, 0.05, 0.025};
  double horizon = 1.0;
  std::string test_function = "gaussian";
  std::uint64_t seed = 0;

  EvaluationMode evaluation = EvaluationMode::Grid;
  OracleMode oracle = OracleMode::Pde;

  // Grid / PDE mode.
  double lower = -4.0;
  double upper = 4.0;
  Index grid_nodes = 4096;       ///< interval cells, or circle nodes
  double window_fraction = 0.6;  ///< central part of the interval used for the sup norm
  Index max_time_steps = Index{1} << 17;

  // Monte Carlo / fine-SDE mode.
  Index samples = 100000;
  double substep_fraction = 0.05;  ///< delta = fraction * eta, at most 1/20
  Vector start;                    ///< x0 (or w0)

  NoiseChoice noise = NoiseChoice::GradientVariance;
  SphereBuildOptions sphere_options;

  /// Ladder: at least 4 points, decreasing by a factor 2 (relative tolerance 1e-9).
  void validate() const;
};

/// Steps n = round(T / eta).
Index step_count(double horizon, double eta);

struct WeakErrorPoint {
  double eta = 0.0;
  Index steps = 0;
  double error = 0.0;
  double oracle_check = 0.0;      ///< CN step-doubling difference (grid mode)
  Index oracle_time_steps = 0;
  double standard_error = 0.0;    ///< combined MC standard error (MC mode)
  bool floor = false;             ///< excluded from the fit
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  ///< RMS of log-log residuals
  double ci_low = 0.0;
  double ci_high = 0.0;
  Index points = 0;
};

/// Least squares of log e on log eta. Needs >= 3 points with eta, e > 0;
/// the 95% interval uses Student's t with n - 2 degrees of freedom.
SlopeFit fit_slope(std::span<const double> eta, std::span<const double> error);

struct WeakErrorReport {
  Space space = Space::Line;
  int order = 1;
  double horizon = 1.0;
  std::string test_function;
  EvaluationMode evaluation = EvaluationMode::Grid;
  OracleMode oracle = OracleMode::Pde;
  std::uint64_t seed = 0;
  Index grid_nodes = 0;
  double window_lower = 0.0;
  double window_upper = 0.0;
  std::vector<WeakErrorPoint> points;
  std::optional<SlopeFit> fit;
  std::vector<std::string> warnings;
  double runtime_seconds = 0.0;  ///< not part of the serialised report
};

/// Runs the plan; each ladder point is an independent job on up to `jobs`
/// threads. Deterministic for a given plan.
WeakErrorReport run_weak_error(const ExperimentPlan& plan, int jobs = 1);

/// Machine-readable report; runtime metadata is left out so identical plans
/// give identical bytes.
void write_json(std::ostream& out, const WeakErrorReport& report);
void write_text(std::ostream& out, const WeakErrorReport& report);
/// "eta,error" rows.
void write_csv(std::ostream& out, const WeakErrorReport& report);

// ---------------------------------------------------------------------------

struct DecayRow {
  double eta = 0.0;
  double remainder = 0.0;
  double ratio = 0.0;  ///< remainder(2 eta) / remainder(eta); 0 on the first row
};

/// |u(Q(w + eta v)) - base - eta order1 - eta^2 order2| along the ladder.
std::vector<DecayRow> taylor_remainder_study(const ScalarField<double>& u, const Vector& w, const Vector& v,
                                             std::span<const double> ladder);

/// One-step expansion of the SGA chain:
///   E u(Q(w + eta xi xi^T w)) = u + eta grad_S f . grad_S u
///                             + 1/2 eta^2 (M : grad_S^2 u - w . M grad_S u) + O(eta^3).
std::vector<DecayRow> sga_one_step_study(const DataModel& model, const ScalarField<double>& u,
                                         const Vector& w, std::span<const double> ladder);

struct TaylorCase {
  Index dimension = 0;
  Index pair = 0;
  bool radial = false;  ///< v = w scaled, so the perturbation is invisible
  std::vector<DecayRow> rows;
};

/// For each dimension, `pairs` random (w, v) with the field
/// u = exp(c . x) + 1/2 x^T A x (c, A random per pair), plus the radial
/// direction v = 0.7 w for each w.
std::vector<TaylorCase> taylor_study(std::span<const Index> dimensions, Index pairs, std::span<const double> ladder,
                                     std::uint64_t seed);

void write_json(std::ostream& out, const std::vector<TaylorCase>& cases);
/// "dimension,pair,radial,eta,remainder,ratio" rows.
void write_csv(std::ostream& out, const std::vector<TaylorCase>& cases);

// ---------------------------------------------------------------------------

struct SuiteRow {
  std::string name;
  bool within_hypotheses = true;
  bool passed = true;  ///< meaningful only within hypotheses
  double margin = 0.0;
  std::string note;
};

struct SuiteReport {
  std::vector<SuiteRow> rows;
  /// True when every row inside its hypotheses passed.
  bool passed() const;
};

struct SuiteSettings {
  std::uint64_t seed = 0;

  // L-infinity contraction of both grid semigroups.
  LossProblemPtr line_problem;
  DataModelPtr circle_model;
  double lower = -4.0;
  double upper = 4.0;
  Index line_cells = 4096;
  Index circle_nodes = 2048;
  double eta = 0.1;
  double horizon = 1.0;
  Index random_functions = 20;

  // Finite speed of propagation, 1D confining family.
  std::shared_ptr<const ConfiningFamily> speed_problem;
  Index speed_steps = 10;

  // Mass confinement.
  std::shared_ptr<const ConfiningFamily> confining;
  double radius = 2.0;
  double confinement_eta = 2.0;
  Index trajectories = 1000;
  Index confinement_steps = 100000;

  // Dual operator.
  LossProblemPtr density_problem;
  double density_eta = 0.05;
  double density_lower = -2.0;
  double density_upper = 2.0;
  Index density_cells = 4096;
};

/// Settings with the built-in problems filled in.
SuiteSettings default_suite_settings(std::uint64_t seed);

SuiteReport contraction_and_confinement_suite(const SuiteSettings& settings, int jobs = 1);

void write_json(std::ostream& out, const SuiteReport& report);
void write_text(std::ostream& out, const SuiteReport& report);

// ---------------------------------------------------------------------------

/// Smooth random test functions (low-frequency trigonometric sums) for
/// contraction checks; function i depends only on (seed, i).
std::function<double(double)> random_smooth_function(std::uint64_t seed, Index i, double lower, double upper);

/// C-infinity bump supported in [center - radius, center + radius].
double smooth_bump(double x, double center, double radius);

// ---------------------------------------------------------------------------

struct BrownianStatistic {
  double mean = 0.0;
  double standard_error = 0.0;
  double expected = 0.0;  ///< exp(-(d - 1) eta t / 2)
  Index paths = 0;
};

/// E[w(t) . w(0)] for dw = sqrt(eta) P o dW on S^{d-1}, estimated from `paths`
/// Heun paths of substep `substep` started at e_1.
BrownianStatistic spherical_brownian_statistic(Index dimension, double eta, double time, Index paths,
                                               double substep, std::uint64_t seed, int jobs = 1);

}  // namespace sgdlab
