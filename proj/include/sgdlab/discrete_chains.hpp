#pragma once

// The discrete Markov chains and their semigroups: SGD iterates in R^d, the
// Oja / stochastic-gradient-ascent chain on the unit sphere, Monte Carlo and
// grid evaluation of u^n = S^n phi, and the 1D dual operator acting on
// densities.

#include "sgdlab/grid.hpp"
#include "sgdlab/problems.hpp"
#include "sgdlab/random.hpp"
#include "sgdlab/sphere_geometry.hpp"
#include "sgdlab/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace sgdlab {

struct ChainConfig {
  double step_size = 0.1;
  Index steps = 10;
  std::uint64_t seed = 0;
  Vector initial_state;

  /// T = steps * step_size.
  double horizon() const { return static_cast<double>(steps) * step_size; }
  /// Throws InvalidArgument unless step_size > 0, steps >= 0 and the initial
  /// state is finite and non-empty.
  void validate() const;
};

/// Draws component indices from a finite distribution using the counter
/// stream (seed, trajectory).
class AtomStream {
 public:
  AtomStream(const Vector& weights, std::uint64_t seed, std::uint64_t trajectory);

  Index next();

 private:
  std::vector<double> cumulative_;
  CounterRng rng_;
};

/// x - eta grad f(x, k).
Vector sgd_step(const LossProblem& problem, const Vector& x, Index k, double eta);

/// Q(w + eta xi_k xi_k^T w), with Q v = v / |v|. Requires |w| = 1.
SpherePoint<double> sga_step(const DataModel& model, const Vector& w, Index k, double eta);

using Trajectory = std::vector<Vector>;

/// States x_0..x_n of trajectory number `trajectory`; deterministic given the
/// config seed.
Trajectory run_chain(const ChainConfig& config, const LossProblem& problem, std::uint64_t trajectory = 0);
Trajectory run_chain(const ChainConfig& config, const DataModel& model, std::uint64_t trajectory = 0);

/// Same, driven by an explicit atom sequence (its length must equal config.steps).
Trajectory run_chain(const ChainConfig& config, const LossProblem& problem, std::span<const Index> atoms);
Trajectory run_chain(const ChainConfig& config, const DataModel& model, std::span<const Index> atoms);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;  ///< sample standard deviation / sqrt(samples)
  Index samples = 0;
};

/// Estimate of u^n(x_0) = E phi(x_n) from `samples` independent chains.
/// The result does not depend on `jobs`.
MonteCarloEstimate mc_semigroup(const ChainConfig& config, const LossProblem& problem,
                                const TestFunction& phi, Index samples, int jobs = 1);
MonteCarloEstimate mc_semigroup(const ChainConfig& config, const DataModel& model,
                                const TestFunction& phi, Index samples, int jobs = 1);

/// Point (cos theta, sin theta) of the unit circle.
Vector circle_point(double theta);

/// One step of the chain's semigroup, Su(x) = E u(x'), tabulated on a grid.
///
/// Interval grids carry the SGD chain of a one-dimensional LossProblem; circle
/// grids carry the SGA chain of a two-dimensional DataModel in the angle
/// coordinate w = (cos theta, sin theta). The displaced points and their cubic
/// stencils depend only on (grid, problem, eta) and are computed once, so
/// repeated application is a sparse matrix-vector product.
class GridSemigroup {
 public:
  /// Throws OutsideDomain naming the node if some displaced point leaves the
  /// interval.
  GridSemigroup(const Grid& grid, const LossProblem& problem, double eta);
  GridSemigroup(const Grid& grid, const DataModel& model, double eta);

  const Grid& grid() const { return grid_; }

  GridFunction apply(const GridFunction& u) const;
  GridFunction apply(const GridFunction& u, Index times) const;

 private:
  Grid grid_;
  Index branches_ = 0;
  // Node-major: entry i * branches_ + k holds the stencil of atom k at node i
  // with the atom probability folded into the weights.
  std::vector<CubicStencil> stencils_;
};

GridFunction apply_semigroup(const GridFunction& u, const LossProblem& problem, double eta);
GridFunction apply_semigroup(const GridFunction& u, const DataModel& model, double eta);

/// Dual operator on (signed) densities for d = 1:
///   S* rho(y) = sum_k w_k rho(h_k(y)) / |1 - eta f_k''(h_k(y))|
/// where h_k inverts x -> x - eta f_k'(x). Requires eta * max_k |f_k''| < 1 on
/// the grid nodes. The inverse is found by Newton iteration safeguarded with
/// bisection inside [y - eta G, y + eta G], G = max |f_k'|; preimages outside
/// the grid contribute zero.
GridFunction pushforward_1d(const GridFunction& rho, const LossProblem& problem, double eta);

/// Dual operator applied to a density; negative interpolation overshoot is
/// clamped to zero and the removed mass is recorded in the result.
DensityGrid pushforward_density_1d(const DensityGrid& rho, const LossProblem& problem, double eta);

/// CSV with header "step,x1,...,xd" and one row per state.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace sgdlab
