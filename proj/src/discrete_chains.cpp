#include "sgdlab/discrete_chains.hpp"

#include "sgdlab/errors.hpp"
#include "sgdlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>

namespace sgdlab {
namespace {

constexpr int kNewtonIterations = 50;

void check_eta(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument("discrete_chains: step size must be finite and nonnegative");
  }
}

template <typename Step>
Trajectory iterate(const ChainConfig& config, Index steps, Step&& step) {
  Trajectory states;
  states.reserve(static_cast<std::size_t>(steps + 1));
  states.push_back(config.initial_state);
  for (Index n = 0; n < steps; ++n) {
    states.push_back(step(states.back(), n));
  }
  return states;
}

MonteCarloEstimate summarize(const std::vector<double>& values) {
  MonteCarloEstimate est;
  est.samples = static_cast<Index>(values.size());
  if (values.empty()) {
    return est;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  est.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - est.mean) * (v - est.mean);
    }
    const double n = static_cast<double>(values.size());
    est.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return est;
}

}  // namespace

void ChainConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw InvalidArgument("discrete_chains: step size must be positive");
  }
  if (steps < 0) {
    throw InvalidArgument("discrete_chains: number of steps must be nonnegative");
  }
  if (initial_state.size() == 0 || !initial_state.allFinite()) {
    throw InvalidArgument("discrete_chains: initial state must be finite and non-empty");
  }
}

AtomStream::AtomStream(const Vector& weights, std::uint64_t seed, std::uint64_t trajectory)
    : rng_(seed, trajectory) {
  cumulative_.resize(static_cast<std::size_t>(weights.size()));
  double total = 0.0;
  for (Index k = 0; k < weights.size(); ++k) {
    total += weights(k);
    cumulative_[static_cast<std::size_t>(k)] = total;
  }
}

Index AtomStream::next() {
  const double u = uniform01(rng_) * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto k = std::distance(cumulative_.begin(), it);
  return std::min<Index>(k, static_cast<Index>(cumulative_.size()) - 1);
}

Vector sgd_step(const LossProblem& problem, const Vector& x, Index k, double eta) {
  return x - eta * problem.gradient(x, k);
}

SpherePoint<double> sga_step(const DataModel& model, const Vector& w, Index k, double eta) {
  const SpherePoint<double> start(w);
  const auto xi = model.atom(k);
  return normalize(Vector(start.vector() + eta * xi * xi.dot(start.vector())));
}

Trajectory run_chain(const ChainConfig& config, const LossProblem& problem, std::uint64_t trajectory) {
  config.validate();
  AtomStream atoms(problem.component_weights(), config.seed, trajectory);
  return iterate(config, config.steps, [&](const Vector& x, Index) {
    return sgd_step(problem, x, atoms.next(), config.step_size);
  });
}

Trajectory run_chain(const ChainConfig& config, const DataModel& model, std::uint64_t trajectory) {
  config.validate();
  AtomStream atoms(model.probabilities(), config.seed, trajectory);
  return iterate(config, config.steps, [&](const Vector& w, Index) {
    return sga_step(model, w, atoms.next(), config.step_size).vector();
  });
}

Trajectory run_chain(const ChainConfig& config, const LossProblem& problem, std::span<const Index> atoms) {
  config.validate();
  if (static_cast<Index>(atoms.size()) != config.steps) {
    throw InvalidArgument("discrete_chains: atom sequence length must equal the number of steps");
  }
  return iterate(config, config.steps, [&](const Vector& x, Index n) {
    return sgd_step(problem, x, atoms[static_cast<std::size_t>(n)], config.step_size);
  });
}

Trajectory run_chain(const ChainConfig& config, const DataModel& model, std::span<const Index> atoms) {
  config.validate();
  if (static_cast<Index>(atoms.size()) != config.steps) {
    throw InvalidArgument("discrete_chains: atom sequence length must equal the number of steps");
  }
  return iterate(config, config.steps, [&](const Vector& w, Index n) {
    return sga_step(model, w, atoms[static_cast<std::size_t>(n)], config.step_size).vector();
  });
}

MonteCarloEstimate mc_semigroup(const ChainConfig& config, const LossProblem& problem,
                                const TestFunction& phi, Index samples, int jobs) {
  config.validate();
  if (samples <= 0) {
    throw InvalidArgument("discrete_chains: need at least one Monte Carlo sample");
  }
  std::vector<double> values(static_cast<std::size_t>(samples));
  parallel_for(samples, jobs, [&](Index s) {
    AtomStream atoms(problem.component_weights(), config.seed, static_cast<std::uint64_t>(s));
    Vector x = config.initial_state;
    for (Index n = 0; n < config.steps; ++n) {
      x = sgd_step(problem, x, atoms.next(), config.step_size);
    }
    values[static_cast<std::size_t>(s)] = phi(x);
  });
  return summarize(values);
}

MonteCarloEstimate mc_semigroup(const ChainConfig& config, const DataModel& model,
                                const TestFunction& phi, Index samples, int jobs) {
  config.validate();
  if (samples <= 0) {
    throw InvalidArgument("discrete_chains: need at least one Monte Carlo sample");
  }
  std::vector<double> values(static_cast<std::size_t>(samples));
  parallel_for(samples, jobs, [&](Index s) {
    AtomStream atoms(model.probabilities(), config.seed, static_cast<std::uint64_t>(s));
    Vector w = config.initial_state;
    for (Index n = 0; n < config.steps; ++n) {
      w = sga_step(model, w, atoms.next(), config.step_size).vector();
    }
    values[static_cast<std::size_t>(s)] = phi(w);
  });
  return summarize(values);
}

Vector circle_point(double theta) {
  Vector w(2);
  w << std::cos(theta), std::sin(theta);
  return w;
}

// ---------------------------------------------------------------------------

GridSemigroup::GridSemigroup(const Grid& grid, const LossProblem& problem, double eta) : grid_(grid) {
  check_eta(eta);
  if (grid.periodic()) {
    throw InvalidArgument("discrete_chains: the SGD semigroup needs an interval grid");
  }
  if (problem.dimension() != 1) {
    throw InvalidArgument("discrete_chains: grid semigroup needs a one-dimensional problem");
  }
  branches_ = problem.component_count();
  stencils_.resize(static_cast<std::size_t>(grid.size() * branches_));
  Vector x(1);
  for (Index i = 0; i < grid.size(); ++i) {
    x(0) = grid.node(i);
    for (Index k = 0; k < branches_; ++k) {
      const double target = sgd_step(problem, x, k, eta)(0);
      CubicStencil st;
      try {
        st = grid.stencil(target);
      } catch (const OutsideDomain&) {
        throw OutsideDomain("discrete_chains: node " + std::to_string(i) + " (x = " +
                            std::to_string(x(0)) + ") is displaced by component " +
                            std::to_string(k) + " to " + std::to_string(target) +
                            ", outside the grid; enlarge the domain or use a confining problem");
      }
      for (double& wt : st.weights) {
        wt *= problem.component_weights()(k);
      }
      stencils_[static_cast<std::size_t>(i * branches_ + k)] = st;
    }
  }
}

GridSemigroup::GridSemigroup(const Grid& grid, const DataModel& model, double eta) : grid_(grid) {
  check_eta(eta);
  if (!grid.periodic()) {
    throw InvalidArgument("discrete_chains: the SGA semigroup needs a circle grid");
  }
  if (model.dimension() != 2) {
    throw InvalidArgument("discrete_chains: circle semigroup needs a two-dimensional data model");
  }
  branches_ = model.atom_count();
  stencils_.resize(static_cast<std::size_t>(grid.size() * branches_));
  for (Index i = 0; i < grid.size(); ++i) {
    const double theta = grid.node(i);
    const Vector w = circle_point(theta);
    Vector t(2);
    t << -w(1), w(0);
    for (Index k = 0; k < branches_; ++k) {
      const auto xi = model.atom(k);
      const Vector moved = w + eta * xi * xi.dot(w);
      // Angle increment measured from w keeps the image coordinate continuous.
      const double target = theta + std::atan2(moved.dot(t), moved.dot(w));
      CubicStencil st = grid.stencil(target);
      for (double& wt : st.weights) {
        wt *= model.probabilities()(k);
      }
      stencils_[static_cast<std::size_t>(i * branches_ + k)] = st;
    }
  }
}

GridFunction GridSemigroup::apply(const GridFunction& u) const {
  if (!(u.grid() == grid_)) {
    throw InvalidArgument("discrete_chains: grid function lives on a different grid");
  }
  const Index n = grid_.size();
  const Vector& in = u.values();
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index k = 0; k < branches_; ++k) {
      const CubicStencil& st = stencils_[static_cast<std::size_t>(i * branches_ + k)];
      for (int j = 0; j < 4; ++j) {
        Index idx = st.first + j;
        if (idx >= n) {
          idx -= n;
        }
        acc += st.weights[static_cast<std::size_t>(j)] * in(idx);
      }
    }
    out(i) = acc;
  }
  return GridFunction(grid_, std::move(out));
}

GridFunction GridSemigroup::apply(const GridFunction& u, Index times) const {
  GridFunction current = u;
  for (Index n = 0; n < times; ++n) {
    current = apply(current);
  }
  return current;
}

GridFunction apply_semigroup(const GridFunction& u, const LossProblem& problem, double eta) {
  return GridSemigroup(u.grid(), problem, eta).apply(u);
}

GridFunction apply_semigroup(const GridFunction& u, const DataModel& model, double eta) {
  return GridSemigroup(u.grid(), model, eta).apply(u);
}

// ---------------------------------------------------------------------------

namespace {

struct InverseBranch {
  double preimage = 0.0;
  double jacobian = 1.0;  // 1 - eta f''(preimage), positive
};

// Preimage of y under x -> x - eta f_k'(x) within [lower, upper], where the map
// is increasing. A preimage inside the domain lies within eta G of y; if the
// residual has no sign change there, the preimage is outside the domain.
std::optional<InverseBranch> invert_sgd_map(const LossProblem& problem, Index k, double eta, double y,
                                            double gmax, double lower, double upper) {
  Vector x(1);
  const auto residual = [&](double s) {
    x(0) = s;
    return s - eta * problem.gradient(x, k)(0) - y;
  };
  const auto slope = [&](double s) {
    x(0) = s;
    return 1.0 - eta * problem.hessian(x, k)(0, 0);
  };

  const double radius = 1.01 * eta * gmax + 1e-12;
  double lo = std::max(y - radius, lower);
  double hi = std::min(y + radius, upper);
  if (residual(lo) > 0.0 || residual(hi) < 0.0) {
    return std::nullopt;
  }

  double s = std::clamp(y, lo, hi);
  const double scale = 1.0 + std::abs(y);
  for (int it = 0; it < kNewtonIterations; ++it) {
    const double r = residual(s);
    if (std::abs(r) <= 1e-15 * scale || hi - lo <= 4e-16 * scale) {
      const double jac = slope(s);
      if (!(jac > 0.0)) {
        throw InvalidArgument("discrete_chains: the SGD map is not invertible (1 - eta f'' = " +
                              std::to_string(jac) + ")");
      }
      return InverseBranch{s, jac};
    }
    if (r < 0.0) {
      lo = s;
    } else {
      hi = s;
    }
    const double d = slope(s);
    double next = d > 0.0 ? s - r / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    s = next;
  }
  throw ConvergenceFailure("discrete_chains: Newton inversion did not converge in " +
                           std::to_string(kNewtonIterations) + " iterations at y = " + std::to_string(y));
}

GridFunction pushforward_impl(const GridFunction& rho, const LossProblem& problem, double eta,
                              bool clamp, double* clamped_mass) {
  check_eta(eta);
  const Grid& grid = rho.grid();
  if (grid.periodic() || problem.dimension() != 1) {
    throw InvalidArgument("discrete_chains: pushforward is implemented for d = 1 on an interval");
  }
  const Index n = grid.size();
  const Index branches = problem.component_count();

  std::vector<double> gmax(static_cast<std::size_t>(branches), 0.0);
  Vector x(1);
  for (Index k = 0; k < branches; ++k) {
    double curvature = 0.0;
    for (Index i = 0; i < n; ++i) {
      x(0) = grid.node(i);
      gmax[static_cast<std::size_t>(k)] =
          std::max(gmax[static_cast<std::size_t>(k)], std::abs(problem.gradient(x, k)(0)));
      curvature = std::max(curvature, std::abs(problem.hessian(x, k)(0, 0)));
    }
    if (!(eta * curvature < 1.0)) {
      throw InvalidArgument("discrete_chains: pushforward needs eta * sup|f''| < 1 (got " +
                            std::to_string(eta * curvature) + ")");
    }
  }

  Vector out = Vector::Zero(n);
  Vector removed = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const double y = grid.node(i);
    for (Index k = 0; k < branches; ++k) {
      const auto inv = invert_sgd_map(problem, k, eta, y, gmax[static_cast<std::size_t>(k)], grid.lower(),
                                      grid.upper());
      if (!inv) {
        continue;  // density is zero outside the tabulated domain
      }
      double value = rho(inv->preimage);
      const double weight = problem.component_weights()(k) / inv->jacobian;
      if (clamp && value < 0.0) {
        removed(i) -= weight * value;
        value = 0.0;
      }
      out(i) += weight * value;
    }
  }
  if (clamped_mass != nullptr) {
    *clamped_mass = trapezoid(grid, removed);
  }
  return GridFunction(grid, std::move(out));
}

}  // namespace

GridFunction pushforward_1d(const GridFunction& rho, const LossProblem& problem, double eta) {
  return pushforward_impl(rho, problem, eta, false, nullptr);
}

DensityGrid pushforward_density_1d(const DensityGrid& rho, const LossProblem& problem, double eta) {
  double clamped = 0.0;
  GridFunction out = pushforward_impl(rho.density(), problem, eta, true, &clamped);
  return DensityGrid(std::move(out), clamped);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const auto old_precision = out.precision(17);
  const Index d = trajectory.empty() ? 0 : trajectory.front().size();
  out << "step";
  for (Index j = 0; j < d; ++j) {
    out << ",x" << (j + 1);
  }
  out << '\n';
  for (std::size_t n = 0; n < trajectory.size(); ++n) {
    out << n;
    for (Index j = 0; j < d; ++j) {
      out << ',' << trajectory[n](j);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace sgdlab
