#pragma once

// Problem instances for the periodic-review setup-cost inventory model:
// cost data, demand, shortfall rule, and the four order/storage constraint
// regimes (U, BO, BS, BOS).

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace stockdp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A state lies outside the state space of its regime.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An order is not in the feasible action set.
class ConstraintError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Convex holding/backorder cost h, normalized so that inf h = 0.
 *
 * Two representations:
 *  - piecewise linear: h(x) = max_i (slope_i x + intercept_i) - offset;
 *  - tabulated: linear interpolation between nodes, linear extension past
 *    the edge nodes with the edge slopes.
 *
 * Tabulated values may be +inf. Such entries stand for costs beyond the
 * floating-point range (e.g. 2^(x^2) for |x| >= 32) and must form runs at
 * the table ends; any evaluation touching them returns +inf.
 *
 * The raw input is kept as given; the normalizing offset is applied on
 * evaluation. Structural problems are reported by violations(), not thrown,
 * so an invalid instance can still be inspected and serialized.
 */
class HoldingCost {
 public:
  enum class Kind { PiecewiseLinear, Tabulated };
  struct Piece {
    double slope;
    double intercept;
    bool operator==(const Piece&) const = default;
  };
  struct Node {
    double x;
    double h;
    bool operator==(const Node&) const = default;
  };

  static HoldingCost piecewise_linear(std::vector<Piece> pieces);
  static HoldingCost tabulated(std::vector<Node> nodes);
  /// holding * max(x, 0) + backorder * max(-x, 0)
  static HoldingCost linear(double holding, double backorder);

  double operator()(double x) const;

  Kind kind() const { return kind_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  double offset() const { return offset_; }

  /// k_h: magnitude of the slope as x -> -inf (+inf for a tabulated h
  /// whose left edge is infinite).
  double left_slope_magnitude() const;

  std::vector<std::string> violations() const;

  bool operator==(const HoldingCost& o) const {
    return kind_ == o.kind_ && pieces_ == o.pieces_ && nodes_ == o.nodes_;
  }

 private:
  HoldingCost() = default;
  double raw(double x) const;

  Kind kind_ = Kind::PiecewiseLinear;
  std::vector<Piece> pieces_;
  std::vector<Node> nodes_;
  double offset_ = 0.0;
};

class DemandDistribution {
 public:
  struct Atom {
    double d;
    double p;
    bool operator==(const Atom&) const = default;
  };

  DemandDistribution() = default;
  /// Atoms are sorted by size; duplicates are kept as given.
  explicit DemandDistribution(std::vector<Atom> atoms);
  static DemandDistribution dirac(double d) { return DemandDistribution({{d, 1.0}}); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  double mean() const;
  double max() const;
  std::vector<std::string> violations() const;

  bool operator==(const DemandDistribution&) const = default;

 private:
  std::vector<Atom> atoms_;
};

enum class Shortfall { Backorders, LostSales };

/// T(x): identity for backorders, max(0, x) for lost sales.
inline double apply_shortfall(double x, Shortfall rule) {
  return rule == Shortfall::LostSales && x < 0.0 ? 0.0 : x;
}

struct ConstraintRegime {
  enum class Kind { U, BO, BS, BOS };
  Kind kind = Kind::U;
  double a_bar = kInf;  ///< maximum order size
  double x_bar = kInf;  ///< storage capacity

  static ConstraintRegime unbounded() { return {Kind::U, kInf, kInf}; }
  static ConstraintRegime bounded_orders(double a_bar) { return {Kind::BO, a_bar, kInf}; }
  static ConstraintRegime bounded_storage(double x_bar) { return {Kind::BS, kInf, x_bar}; }
  static ConstraintRegime bounded_both(double a_bar, double x_bar) {
    return {Kind::BOS, a_bar, x_bar};
  }

  bool bounded_orders_flag() const { return kind == Kind::BO || kind == Kind::BOS; }
  bool bounded_storage_flag() const { return kind == Kind::BS || kind == Kind::BOS; }
  std::vector<std::string> violations() const;

  bool operator==(const ConstraintRegime&) const = default;
};

std::string to_string(ConstraintRegime::Kind kind);
std::string to_string(Shortfall rule);

struct ModelSpec {
  double K = 1.0;      ///< setup cost
  double c_bar = 1.0;  ///< per-unit ordering cost
  HoldingCost h = HoldingCost::linear(1.0, 1.0);
  DemandDistribution demand = DemandDistribution::dirac(1.0);
  double alpha = 0.9;
  ConstraintRegime regime = ConstraintRegime::unbounded();
  Shortfall shortfall = Shortfall::Backorders;

  bool operator==(const ModelSpec&) const = default;
};

struct ActionInterval {
  double lo = 0.0;
  double hi = 0.0;  ///< +inf when orders are unbounded
  bool contains(double a) const;
};

/// A(x) for the regime. Throws DomainError when x is not a state of the
/// regime (x < 0 under lost sales, x > x_bar under bounded storage).
ActionInterval feasible_actions(double x, const ConstraintRegime& regime,
                                Shortfall shortfall = Shortfall::Backorders);

/// T(x + a - d). Throws ConstraintError for a < 0 or d < 0.
double transition(double x, double a, double d, Shortfall shortfall);
/// As above, additionally checking a in A(x) for the spec's regime.
double transition(double x, double a, double d, const ModelSpec& spec);

/// E h(T(y - D)) for the post-order level y = x + a.
double expected_holding(double y, const ModelSpec& spec);

/// c(x, a) = K 1{a > 0} + c_bar a + E h(T(x + a - D)).
double one_step_cost(double x, double a, const ModelSpec& spec);

/// Empty iff every invariant of the instance holds.
std::vector<std::string> validate(const ModelSpec& spec);

}  // namespace stockdp
