#include "stockdp/grid.hpp"

#include <cmath>
#include <string>

namespace stockdp {

Grid::Grid(double x_min, double x_max, double step) : x_min_(x_min), step_(step), size_(0) {
  if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("grid step must be > 0");
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || x_max < x_min)
    throw std::invalid_argument("grid bounds must be finite with x_min <= x_max");
  const double span = (x_max - x_min) / step;
  const double rounded = std::round(span);
  if (std::abs(span - rounded) > 1e-6)
    throw std::invalid_argument("grid span x_max - x_min must be a multiple of the step");
  size_ = static_cast<std::size_t>(rounded) + 1;
}

std::optional<std::ptrdiff_t> Grid::index_of(double x) const {
  const double r = (x - x_min_) / step_;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-6 || k < 0.0 || k > static_cast<double>(size_ - 1)) return std::nullopt;
  return static_cast<std::ptrdiff_t>(k);
}

std::optional<std::int64_t> Grid::steps(double length) const {
  if (!std::isfinite(length)) return std::nullopt;
  const double r = length / step_;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-6) return std::nullopt;
  return static_cast<std::int64_t>(k);
}

std::vector<std::string> grid_violations(const Grid& grid, const ModelSpec& spec) {
  std::vector<std::string> out;
  if (spec.shortfall == Shortfall::LostSales && std::abs(grid.x_min()) > 1e-9 * grid.step())
    out.emplace_back("grid: x_min must be 0 under lost sales");
  if (spec.regime.bounded_storage_flag() &&
      std::abs(grid.x_max() - spec.regime.x_bar) > 1e-6 * grid.step())
    out.emplace_back("grid: x_max must equal x_bar under bounded storage");
  for (const auto& atom : spec.demand.atoms())
    if (!grid.steps(atom.d)) {
      out.emplace_back("grid: demand atoms must be multiples of the grid step");
      break;
    }
  if (grid.size() < 2) out.emplace_back("grid: at least 2 points required");
  return out;
}

ValueFunction::ValueFunction(Grid grid, std::vector<double> values, std::optional<int> stage)
    : grid_(grid), values_(std::move(values)), stage_(stage) {
  if (values_.size() != grid_.size()) throw GridMismatch("value table size does not match grid");
  if (values_.size() >= 2) slope_low_ = (values_[1] - values_[0]) / grid_.step();
}

double ValueFunction::at_index(std::ptrdiff_t i) const {
  if (i >= 0) return values_[static_cast<std::size_t>(i)];
  if (!std::isfinite(values_[0]) || !std::isfinite(slope_low_)) return kInf;
  return values_[0] + slope_low_ * grid_.step() * static_cast<double>(i);
}

double ValueFunction::at(double x) const {
  const double r = (x - grid_.x_min()) / grid_.step();
  if (r <= 0.0) {
    if (!std::isfinite(values_[0]) || !std::isfinite(slope_low_)) return kInf;
    return values_[0] + slope_low_ * (x - grid_.x_min());
  }
  const auto lo = static_cast<std::size_t>(std::floor(r));
  if (lo + 1 >= values_.size()) return values_.back();
  const double w = r - static_cast<double>(lo);
  if (w == 0.0) return values_[lo];
  return (1.0 - w) * values_[lo] + w * values_[lo + 1];
}

PolicyTable::PolicyTable(Grid grid, std::vector<std::int64_t> order_steps)
    : grid_(grid), steps_(std::move(order_steps)) {
  if (steps_.size() != grid_.size()) throw GridMismatch("policy table size does not match grid");
}

}  // namespace stockdp
