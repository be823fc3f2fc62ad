#pragma once

// Uniform state discretization and the tables that live on it.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stockdp/model.hpp"

namespace stockdp {

/// A table was paired with a grid it was not built on.
class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Grid {
 public:
  /// Points x_min, x_min + step, ..., x_max. (x_max - x_min) must be an
  /// integer multiple of step.
  Grid(double x_min, double x_max, double step);

  double x_min() const { return x_min_; }
  double x_max() const { return x_min_ + step_ * static_cast<double>(size_ - 1); }
  double step() const { return step_; }
  std::size_t size() const { return size_; }
  double operator[](std::ptrdiff_t i) const { return x_min_ + step_ * static_cast<double>(i); }

  /// Index of x when x is a grid point (relative slack 1e-6 of a step).
  std::optional<std::ptrdiff_t> index_of(double x) const;
  /// length / step when that is an integer (same slack), else nullopt.
  std::optional<std::int64_t> steps(double length) const;

  bool operator==(const Grid& o) const {
    return x_min_ == o.x_min_ && step_ == o.step_ && size_ == o.size_;
  }

 private:
  double x_min_;
  double step_;
  std::size_t size_;
};

/// Checks the grid against an instance: lost sales need x_min = 0, bounded
/// storage needs x_max = x_bar, and demand atoms (and a_bar, if bounded) must
/// be step multiples. Empty iff compatible.
std::vector<std::string> grid_violations(const Grid& grid, const ModelSpec& spec);

/// Value table v over a grid. Below x_min it extends linearly with the
/// one-sided slope at x_min; non-finite edge values extend as +inf.
class ValueFunction {
 public:
  ValueFunction(Grid grid, std::vector<double> values, std::optional<int> stage);
  static ValueFunction zero(const Grid& grid) {
    return ValueFunction(grid, std::vector<double>(grid.size(), 0.0), 0);
  }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  /// nullopt for a converged (infinite-horizon) table
  std::optional<int> stage() const { return stage_; }
  double boundary_slope_low() const { return slope_low_; }

  double operator[](std::size_t i) const { return values_[i]; }
  /// Value at grid index i; i < 0 is extrapolated.
  double at_index(std::ptrdiff_t i) const;
  /// Value at an arbitrary x <= x_max (linear interpolation inside the grid).
  double at(double x) const;

 private:
  Grid grid_;
  std::vector<double> values_;
  std::optional<int> stage_;
  double slope_low_ = 0.0;
};

/// G(x) = c_bar x + E h(T(x - D)) + alpha E v(T(x - D)) on a grid.
struct GFunction {
  Grid grid;
  std::vector<double> values;
  std::optional<int> stage;
};

/// Order per grid point, stored as a count of grid steps.
class PolicyTable {
 public:
  PolicyTable(Grid grid, std::vector<std::int64_t> order_steps);
  static PolicyTable never_order(const Grid& grid) {
    return PolicyTable(grid, std::vector<std::int64_t>(grid.size(), 0));
  }

  const Grid& grid() const { return grid_; }
  const std::vector<std::int64_t>& order_steps() const { return steps_; }
  double order(std::size_t i) const { return grid_.step() * static_cast<double>(steps_[i]); }
  std::size_t size() const { return steps_.size(); }

  bool operator==(const PolicyTable&) const = default;

 private:
  Grid grid_;
  std::vector<std::int64_t> steps_;
};

}  // namespace stockdp
