#pragma once

// Run configuration for the command-line tool: a JSON document naming the
// experiment, the loss problem / data model and the experiment parameters.
// Every field has a default except the seed; unknown keys are rejected.

#include "sgdlab/problems.hpp"
#include "sgdlab/weak_error_harness.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sgdlab {

inline const std::vector<std::string> kSubcommands = {"sgd-run",         "pca-run",         "weak-order",
                                                      "taylor-study",    "invariant-suite", "density-push"};

struct ProblemConfig {
  std::string family = "quadratic";  ///< quadratic | double_well | confining
  std::vector<std::vector<double>> centers = {{1.0}, {-1.0}};
  std::vector<double> curvatures = {1.0, 1.5};  ///< quadratic: A_k = c_k I
  std::vector<double> tilts = {0.3, -0.3};      ///< double_well
  double scale = 1.0;                           ///< confining
  std::vector<double> weights = {0.5, 0.5};

  bool operator==(const ProblemConfig&) const = default;
};

struct ModelConfig {
  std::vector<std::vector<double>> atoms = {{1.0, 0.2}, {-0.6, 0.7}, {-0.4, -0.9}};
  std::vector<double> probabilities = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  bool operator==(const ModelConfig&) const = default;
};

struct PlanConfig {
  std::string space = "line";  ///< line | circle
  int order = 1;
  std::vector<double> ladder = {0.2, 0.1, 0.05, 0.025};
  double horizon = 1.0;
  std::string test_function;  ///< empty: gaussian on the line, harmonic on the circle
  std::string evaluation = "grid";  ///< grid | monte_carlo
  Index grid_nodes = 0;             ///< 0: 4096 on the line, 2048 on the circle
  double lower = -4.0;
  double upper = 4.0;
  double window_fraction = 0.6;
  Index samples = 100000;
  double substep_fraction = 0.05;
  std::vector<double> start;  ///< Monte Carlo start point; empty: 0.5 (line) or e_1 (circle)
  std::string noise = "variance";  ///< variance | none (order 1 only)
  double correction_weight = 1.0;

  bool operator==(const PlanConfig&) const = default;
};

struct ChainRunConfig {
  double eta = 0.1;
  Index steps = 100;
  Index trajectories = 1;
  std::vector<double> start;  ///< empty: 0.5 for SGD, e_1 for PCA

  bool operator==(const ChainRunConfig&) const = default;
};

struct TaylorConfig {
  std::vector<Index> dimensions = {2, 3, 5};
  Index pairs = 10;
  std::vector<double> ladder = {1e-2, 5e-3, 2.5e-3, 1.25e-3};

  bool operator==(const TaylorConfig&) const = default;
};

struct SuiteConfig {
  double eta = 0.1;
  double horizon = 1.0;
  Index random_functions = 20;
  Index speed_steps = 10;
  double radius = 2.0;
  double confinement_eta = 2.0;
  Index trajectories = 1000;
  Index confinement_steps = 100000;
  double density_eta = 0.05;

  bool operator==(const SuiteConfig&) const = default;
};

struct DensityConfig {
  double eta = 0.05;
  Index steps = 10;
  double lower = -2.0;
  double upper = 2.0;
  Index cells = 4096;
  double mean = 0.3;   ///< initial Gaussian density
  double width = 0.3;

  bool operator==(const DensityConfig&) const = default;
};

struct RunConfig {
  std::string subcommand = "weak-order";
  std::uint64_t seed = 0;
  std::string output;  ///< output directory; --out overrides
  ProblemConfig problem;
  ModelConfig model;
  PlanConfig plan;
  ChainRunConfig chain;
  TaylorConfig taylor;
  SuiteConfig suite;
  DensityConfig density;

  bool operator==(const RunConfig&) const = default;
};

/// Parses and validates a JSON document. `seed_override` replaces (or
/// supplies) the seed. Throws ConfigError with the offending key path, and the
/// line for syntax errors.
RunConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = std::nullopt);

/// Fully resolved JSON; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

LossProblemPtr make_problem(const ProblemConfig& config);
DataModelPtr make_model(const ModelConfig& config);
ExperimentPlan make_plan(const RunConfig& config);
SuiteSettings make_suite_settings(const RunConfig& config);

}  // namespace sgdlab
