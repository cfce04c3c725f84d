#include "sgdlab/grid.hpp"

#include "sgdlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace sgdlab {
namespace {

std::array<double, 4> lagrange_weights(double t) {
  // Nodes at -1, 0, 1, 2 relative to the cell start.
  return {-t * (t - 1.0) * (t - 2.0) / 6.0, (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
          -(t + 1.0) * t * (t - 2.0) / 2.0, (t + 1.0) * t * (t - 1.0) / 6.0};
}

}  // namespace

Grid::Grid(GridKind kind, double lower, double upper, Index cells)
    : kind_(kind), lower_(lower), upper_(upper), cells_(cells) {
  if (cells_ < kMinGridCells) {
    throw InvalidArgument("grid: at least " + std::to_string(kMinGridCells) + " cells required");
  }
  if (!(upper_ > lower_) || !std::isfinite(lower_) || !std::isfinite(upper_)) {
    throw InvalidArgument("grid: interval bounds must be finite with lower < upper");
  }
}

Grid Grid::interval(double lower, double upper, Index cells) {
  return Grid(GridKind::Interval, lower, upper, cells);
}

Grid Grid::circle(Index nodes) { return Grid(GridKind::Circle, 0.0, 2.0 * std::numbers::pi, nodes); }

Vector Grid::nodes() const {
  Vector x(size());
  for (Index i = 0; i < size(); ++i) {
    x(i) = node(i);
  }
  return x;
}

CubicStencil Grid::stencil(double x) const {
  const double h = spacing();
  CubicStencil st;
  if (periodic()) {
    const double period = upper_ - lower_;
    double s = std::fmod(x - lower_, period);
    if (s < 0.0) {
      s += period;
    }
    s /= h;
    Index i = static_cast<Index>(std::floor(s));
    double t = s - static_cast<double>(i);
    if (i >= cells_) {  // s rounded up to exactly cells_
      i -= cells_;
    }
    st.first = (i - 1 + cells_) % cells_;
    st.weights = lagrange_weights(t);
    return st;
  }

  const double slack = 1e-12 * (upper_ - lower_);
  if (!(x >= lower_ - slack && x <= upper_ + slack)) {
    throw OutsideDomain("grid: point " + std::to_string(x) + " outside [" + std::to_string(lower_) +
                        ", " + std::to_string(upper_) + "]");
  }
  const double s = (std::clamp(x, lower_, upper_) - lower_) / h;
  const Index i = std::clamp<Index>(static_cast<Index>(std::floor(s)), 1, cells_ - 2);
  st.first = i - 1;
  st.weights = lagrange_weights(s - static_cast<double>(i));
  return st;
}

// ---------------------------------------------------------------------------

GridFunction::GridFunction(Grid grid, Vector values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw InvalidArgument("grid: expected " + std::to_string(grid_.size()) + " values, got " +
                          std::to_string(values_.size()));
  }
  if (!values_.allFinite()) {
    throw InvalidArgument("grid: grid function values must be finite");
  }
}

GridFunction GridFunction::sample(const Grid& grid, const std::function<double(double)>& f) {
  Vector v(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    v(i) = f(grid.node(i));
  }
  return GridFunction(grid, std::move(v));
}

double GridFunction::operator()(double x) const {
  const CubicStencil st = grid_.stencil(x);
  const Index n = grid_.size();
  double result = 0.0;
  for (int j = 0; j < 4; ++j) {
    Index idx = st.first + j;
    if (idx >= n) {
      idx -= n;
    }
    result += st.weights[j] * values_(idx);
  }
  return result;
}

double trapezoid(const Grid& grid, const Vector& values) {
  const double h = grid.spacing();
  if (grid.periodic()) {
    return h * values.sum();
  }
  return h * (values.sum() - 0.5 * (values(0) + values(values.size() - 1)));
}

DensityGrid::DensityGrid(GridFunction density, double clamped_mass)
    : density_(std::move(density)), clamped_mass_(clamped_mass) {
  if ((density_.values().array() < 0.0).any()) {
    throw InvalidArgument("grid: density values must be nonnegative");
  }
  if (!(mass() > 0.0)) {
    throw InvalidArgument("grid: density must have positive mass");
  }
}

void write_csv(std::ostream& out, const GridFunction& f, const std::string& value_name) {
  const auto old_precision = out.precision(17);
  out << "node," << value_name << '\n';
  for (Index i = 0; i < f.grid().size(); ++i) {
    out << f.grid().node(i) << ',' << f.values()(i) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace sgdlab
