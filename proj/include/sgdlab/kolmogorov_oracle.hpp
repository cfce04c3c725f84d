#pragma once

// Crank-Nicolson solver for the backward Kolmogorov equation
//
//   u_t = a(x) u_x + 1/2 c(x) u_xx,   u(., 0) = phi
//
// on an interval (homogeneous Neumann ends) or on the circle (periodic), plus
// the coordinate reductions of the SDE generators to that form.

#include "sgdlab/grid.hpp"
#include "sgdlab/sde_engine.hpp"
#include "sgdlab/types.hpp"

#include <functional>

namespace sgdlab {

inline constexpr double kSelfCheckTolerance = 1e-7;
inline constexpr double kCollocationTolerance = 1e-6;
inline constexpr Index kCollocationPoints = 64;

struct ParabolicProblem {
  GridFunction initial;
  std::function<double(double)> drift;      ///< a
  std::function<double(double)> diffusion;  ///< c >= 0
  double horizon = 1.0;

  const Grid& grid() const { return initial.grid(); }
};

/// a(theta), c(theta) of L_S in the angle coordinate w = (cos theta, sin theta):
///   a = t.(Pb + Pb1(sigma)) - 1/2 t^T sigma sigma^T w,   c = t^T sigma sigma^T t,
/// t = (-sin theta, cos theta). The coefficients are tabulated at the grid
/// nodes and checked against apply_generator at 64 angles; a mismatch above
/// 1e-6 throws DerivationMismatch. Requires a circle grid and d = 2.
ParabolicProblem reduce_to_circle(const SphereSpec& spec, const GridFunction& initial, double horizon);

/// a = b(x), c = eta Sigma(x) for a one-dimensional Euclidean spec on an
/// interval grid.
ParabolicProblem reduce_to_line(const EuclideanSpec& spec, const GridFunction& initial, double horizon);

struct OracleSolution {
  GridFunction solution;  ///< u(., T) from the finer of the two solves
  double self_check = 0.0;  ///< max |u^(n) - u^(2n)|
  Index time_steps = 0;     ///< 2n
};

/// Solves with n and 2n Crank-Nicolson steps and returns the 2n solution.
/// Throws RefinementFailure if the two differ by more than `tolerance`.
OracleSolution solve_backward(const ParabolicProblem& problem, Index time_steps,
                              double tolerance = kSelfCheckTolerance);

/// solve_backward with n doubled until the self-check passes or n would exceed
/// max_time_steps.
OracleSolution solve_backward_refined(const ParabolicProblem& problem, Index initial_time_steps,
                                      Index max_time_steps, double tolerance = kSelfCheckTolerance);

/// u(., T) after exactly `time_steps` Crank-Nicolson steps, no self-check.
GridFunction crank_nicolson(const ParabolicProblem& problem, Index time_steps);

}  // namespace sgdlab
