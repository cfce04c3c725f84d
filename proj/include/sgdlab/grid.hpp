#pragma once

#include "sgdlab/types.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <string>

namespace sgdlab {

inline constexpr Index kMinGridCells = 16;

enum class GridKind { Interval, Circle };

/// Four-point stencil of a cubic Lagrange interpolant: nodes first..first+3
/// (taken modulo size() on a circle).
struct CubicStencil {
  Index first = 0;
  std::array<double, 4> weights{};
};

/// Uniform 1D grid: an interval [a, b] with M + 1 nodes including both ends,
/// or the circle [0, 2 pi) with M nodes.
class Grid {
 public:
  static Grid interval(double lower, double upper, Index cells);
  static Grid circle(Index nodes);

  GridKind kind() const { return kind_; }
  bool periodic() const { return kind_ == GridKind::Circle; }
  Index cells() const { return cells_; }
  Index size() const { return periodic() ? cells_ : cells_ + 1; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double spacing() const { return (upper_ - lower_) / static_cast<double>(cells_); }
  double node(Index i) const { return lower_ + spacing() * static_cast<double>(i); }
  Vector nodes() const;

  /// Cubic stencil at x. Intervals accept x within a rounding slack of [a, b]
  /// and throw OutsideDomain beyond it; circle coordinates are wrapped.
  CubicStencil stencil(double x) const;

  bool operator==(const Grid&) const = default;

 private:
  Grid(GridKind kind, double lower, double upper, Index cells);

  GridKind kind_;
  double lower_;
  double upper_;
  Index cells_;
};

/// A function tabulated on a Grid with cubic interpolation between nodes.
class GridFunction {
 public:
  GridFunction(Grid grid, Vector values);

  static GridFunction sample(const Grid& grid, const std::function<double(double)>& f);

  const Grid& grid() const { return grid_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  double operator()(double x) const;
  double max_abs() const { return values_.cwiseAbs().maxCoeff(); }

 private:
  Grid grid_;
  Vector values_;
};

/// Trapezoidal quadrature (periodic trapezoid on the circle).
double trapezoid(const Grid& grid, const Vector& values);
inline double trapezoid(const GridFunction& f) { return trapezoid(f.grid(), f.values()); }

/// Nonnegative density on a grid. `clamped_mass` records how much mass was
/// removed when negative interpolation overshoot was clamped to zero while
/// producing it (zero for densities built directly).
class DensityGrid {
 public:
  explicit DensityGrid(GridFunction density, double clamped_mass = 0.0);

  const GridFunction& density() const { return density_; }
  const Grid& grid() const { return density_.grid(); }
  const Vector& values() const { return density_.values(); }
  double mass() const { return trapezoid(density_); }
  double clamped_mass() const { return clamped_mass_; }

 private:
  GridFunction density_;
  double clamped_mass_;
};

/// Writes "node,value" CSV with 17 significant digits and LF line endings.
void write_csv(std::ostream& out, const GridFunction& f, const std::string& value_name = "value");

}  // namespace sgdlab
