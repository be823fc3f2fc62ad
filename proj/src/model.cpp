#include "stockdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace stockdp {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// HoldingCost

HoldingCost HoldingCost::piecewise_linear(std::vector<Piece> pieces) {
  HoldingCost h;
  h.kind_ = Kind::PiecewiseLinear;
  h.pieces_ = std::move(pieces);
  if (h.pieces_.empty()) return h;

  // The minimum of a coercive max-of-affine function sits at a vertex of the
  // upper envelope, i.e. at some pairwise intersection.
  double best = kInf;
  for (std::size_t i = 0; i < h.pieces_.size(); ++i) {
    for (std::size_t j = i + 1; j < h.pieces_.size(); ++j) {
      const auto& a = h.pieces_[i];
      const auto& b = h.pieces_[j];
      if (a.slope == b.slope) continue;
      const double x = (b.intercept - a.intercept) / (a.slope - b.slope);
      best = std::min(best, h.raw(x));
    }
  }
  h.offset_ = std::isfinite(best) ? best : 0.0;
  return h;
}

HoldingCost HoldingCost::tabulated(std::vector<Node> nodes) {
  HoldingCost h;
  h.kind_ = Kind::Tabulated;
  h.nodes_ = std::move(nodes);
  double best = kInf;
  for (const auto& n : h.nodes_)
    if (std::isfinite(n.h)) best = std::min(best, n.h);
  h.offset_ = std::isfinite(best) ? best : 0.0;
  return h;
}

HoldingCost HoldingCost::linear(double holding, double backorder) {
  return piecewise_linear({{holding, 0.0}, {-backorder, 0.0}});
}

double HoldingCost::raw(double x) const {
  if (kind_ == Kind::PiecewiseLinear) {
    double v = -kInf;
    for (const auto& p : pieces_) v = std::max(v, p.slope * x + p.intercept);
    return v;
  }
  const auto n = nodes_.size();
  if (n == 0) return kInf;
  if (n == 1) return nodes_[0].h;

  auto segment = [&](std::size_t k, double at) {
    const Node& a = nodes_[k];
    const Node& b = nodes_[k + 1];
    if (!std::isfinite(a.h) || !std::isfinite(b.h)) return kInf;
    return a.h + (b.h - a.h) / (b.x - a.x) * (at - a.x);
  };

  if (x <= nodes_.front().x) {
    if (x == nodes_.front().x) return nodes_.front().h;
    return segment(0, x);
  }
  if (x >= nodes_.back().x) {
    if (x == nodes_.back().x) return nodes_.back().h;
    return segment(n - 2, x);
  }
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x,
                             [](double v, const Node& node) { return v < node.x; });
  const auto k = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  if (nodes_[k].x == x) return nodes_[k].h;
  return segment(k, x);
}

double HoldingCost::operator()(double x) const {
  const double v = raw(x);
  return std::isfinite(v) ? v - offset_ : v;
}

double HoldingCost::left_slope_magnitude() const {
  if (kind_ == Kind::PiecewiseLinear) {
    double lo = kInf;
    for (const auto& p : pieces_) lo = std::min(lo, p.slope);
    return -lo;
  }
  if (nodes_.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const Node& a = nodes_[0];
  const Node& b = nodes_[1];
  if (!std::isfinite(a.h) || !std::isfinite(b.h)) return kInf;
  return -(b.h - a.h) / (b.x - a.x);
}

std::vector<std::string> HoldingCost::violations() const {
  std::vector<std::string> out;
  if (kind_ == Kind::PiecewiseLinear) {
    if (pieces_.empty()) return {"h: piecewise-linear cost needs at least one piece"};
    double lo = kInf, hi = -kInf;
    for (const auto& p : pieces_) {
      if (!std::isfinite(p.slope) || !std::isfinite(p.intercept))
        out.emplace_back("h: piece coefficients must be finite");
      lo = std::min(lo, p.slope);
      hi = std::max(hi, p.slope);
    }
    if (!(lo < 0.0)) out.emplace_back("h: leftmost slope must be < 0 (h -> inf as x -> -inf)");
    if (!(hi > 0.0)) out.emplace_back("h: rightmost slope must be > 0 (h -> inf as x -> +inf)");
    return out;
  }

  if (nodes_.size() < 2) return {"h: tabulated cost needs at least 2 nodes"};
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!std::isfinite(nodes_[k].x)) out.emplace_back("h: table abscissae must be finite");
    if (std::isnan(nodes_[k].h) || nodes_[k].h == -kInf)
      out.emplace_back("h: table values must be real or +inf");
    if (k > 0 && !(nodes_[k].x > nodes_[k - 1].x))
      out.emplace_back("h: table abscissae must be strictly increasing");
  }
  if (!out.empty()) return out;

  std::size_t first = nodes_.size(), last = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (std::isfinite(nodes_[k].h)) {
      first = std::min(first, k);
      last = k;
    }
  }
  if (first == nodes_.size()) return {"h: table has no finite value"};
  for (std::size_t k = first; k <= last; ++k)
    if (!std::isfinite(nodes_[k].h))
      out.emplace_back("h: infinite table values must sit at the table ends");

  double scale = 0.0;
  for (std::size_t k = first; k <= last; ++k) scale = std::max(scale, std::abs(nodes_[k].h));
  const double eps_conv = 1e-9 * (1.0 + scale);
  for (std::size_t k = first; k + 2 <= last; ++k) {
    const double s0 = (nodes_[k + 1].h - nodes_[k].h) / (nodes_[k + 1].x - nodes_[k].x);
    const double s1 = (nodes_[k + 2].h - nodes_[k + 1].h) / (nodes_[k + 2].x - nodes_[k + 1].x);
    if (s1 - s0 < -eps_conv) {
      out.emplace_back("h: table is not convex near x = " + fmt(nodes_[k + 1].x));
      break;
    }
  }
  if (first == 0) {
    const double s = left_slope_magnitude();
    if (!(s > 0.0)) out.emplace_back("h: left edge slope must be < 0 (h -> inf as x -> -inf)");
  }
  if (last == nodes_.size() - 1) {
    const auto n = nodes_.size();
    const double s = (nodes_[n - 1].h - nodes_[n - 2].h) / (nodes_[n - 1].x - nodes_[n - 2].x);
    if (!(s > 0.0)) out.emplace_back("h: right edge slope must be > 0 (h -> inf as x -> +inf)");
  }
  return out;
}

// ---------------------------------------------------------------------------
// DemandDistribution

DemandDistribution::DemandDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  std::stable_sort(atoms_.begin(), atoms_.end(),
                   [](const Atom& a, const Atom& b) { return a.d < b.d; });
}

double DemandDistribution::mean() const {
  double m = 0.0;
  for (const auto& a : atoms_) m += a.p * a.d;
  return m;
}

double DemandDistribution::max() const { return atoms_.empty() ? 0.0 : atoms_.back().d; }

std::vector<std::string> DemandDistribution::violations() const {
  if (atoms_.empty()) return {"demand: at least one atom required"};
  std::vector<std::string> out;
  double total = 0.0;
  bool positive = false;
  for (const auto& a : atoms_) {
    if (!(a.p > 0.0)) out.emplace_back("demand: every probability must be > 0");
    if (!(a.d >= 0.0) || !std::isfinite(a.d))
      out.emplace_back("demand: every atom must be finite and >= 0");
    if (a.d > 0.0) positive = true;
    total += a.p;
  }
  if (std::abs(total - 1.0) > 1e-12) out.emplace_back("demand: probabilities must sum to 1");
  if (!positive) out.emplace_back("demand: P(D>0)>0 required");
  return out;
}

// ---------------------------------------------------------------------------
// Regimes and dynamics

std::string to_string(ConstraintRegime::Kind kind) {
  switch (kind) {
    case ConstraintRegime::Kind::U: return "U";
    case ConstraintRegime::Kind::BO: return "BO";
    case ConstraintRegime::Kind::BS: return "BS";
    case ConstraintRegime::Kind::BOS: return "BOS";
  }
  return "?";
}

std::string to_string(Shortfall rule) {
  return rule == Shortfall::Backorders ? "backorders" : "lost_sales";
}

std::vector<std::string> ConstraintRegime::violations() const {
  std::vector<std::string> out;
  const std::string name = to_string(kind);
  if (bounded_orders_flag()) {
    if (!(a_bar > 0.0) || !std::isfinite(a_bar))
      out.push_back("regime " + name + ": a_bar must be finite and > 0");
  } else if (a_bar != kInf) {
    out.push_back("regime " + name + ": a_bar must be unbounded");
  }
  if (bounded_storage_flag()) {
    if (!(x_bar > 0.0) || !std::isfinite(x_bar))
      out.push_back("regime " + name + ": x_bar must be finite and > 0");
  } else if (x_bar != kInf) {
    out.push_back("regime " + name + ": x_bar must be unbounded");
  }
  return out;
}

bool ActionInterval::contains(double a) const {
  if (!(a >= lo)) return false;
  if (hi == kInf) return std::isfinite(a);
  return a <= hi + 1e-9 * (1.0 + std::abs(hi));
}

ActionInterval feasible_actions(double x, const ConstraintRegime& regime, Shortfall shortfall) {
  if (shortfall == Shortfall::LostSales && x < 0.0)
    throw DomainError("state " + fmt(x) + " is negative under lost sales (regime " +
                      to_string(regime.kind) + ")");
  if (regime.bounded_storage_flag() && x > regime.x_bar + 1e-9 * (1.0 + std::abs(regime.x_bar)))
    throw DomainError("state " + fmt(x) + " exceeds storage capacity " + fmt(regime.x_bar) +
                      " (regime " + to_string(regime.kind) + ")");
  switch (regime.kind) {
    case ConstraintRegime::Kind::U: return {0.0, kInf};
    case ConstraintRegime::Kind::BO: return {0.0, regime.a_bar};
    case ConstraintRegime::Kind::BS: return {0.0, std::max(0.0, regime.x_bar - x)};
    case ConstraintRegime::Kind::BOS:
      return {0.0, std::min(regime.a_bar, std::max(0.0, regime.x_bar - x))};
  }
  return {0.0, 0.0};
}

double transition(double x, double a, double d, Shortfall shortfall) {
  if (!(a >= 0.0)) throw ConstraintError("order " + fmt(a) + " is negative");
  if (!(d >= 0.0)) throw ConstraintError("demand " + fmt(d) + " is negative");
  return apply_shortfall(x + a - d, shortfall);
}

double transition(double x, double a, double d, const ModelSpec& spec) {
  if (!feasible_actions(x, spec.regime, spec.shortfall).contains(a))
    throw ConstraintError("order " + fmt(a) + " infeasible at state " + fmt(x));
  return transition(x, a, d, spec.shortfall);
}

double expected_holding(double y, const ModelSpec& spec) {
  double total = 0.0;
  for (const auto& atom : spec.demand.atoms()) {
    const double h = spec.h(apply_shortfall(y - atom.d, spec.shortfall));
    if (h == kInf) return kInf;
    total += atom.p * h;
  }
  return total;
}

double one_step_cost(double x, double a, const ModelSpec& spec) {
  if (!feasible_actions(x, spec.regime, spec.shortfall).contains(a))
    throw ConstraintError("order " + fmt(a) + " infeasible at state " + fmt(x));
  return (a > 0.0 ? spec.K : 0.0) + spec.c_bar * a + expected_holding(x + a, spec);
}

std::vector<std::string> validate(const ModelSpec& spec) {
  std::vector<std::string> out;
  if (!(spec.K > 0.0) || !std::isfinite(spec.K)) out.emplace_back("K must be > 0");
  if (!(spec.c_bar > 0.0) || !std::isfinite(spec.c_bar)) out.emplace_back("c_bar must be > 0");
  if (!(spec.alpha >= 0.0 && spec.alpha < 1.0)) out.emplace_back("alpha must lie in [0, 1)");
  for (auto& v : spec.h.violations()) out.push_back(std::move(v));
  for (auto& v : spec.demand.violations()) out.push_back(std::move(v));
  for (auto& v : spec.regime.violations()) out.push_back(std::move(v));
  return out;
}

}  // namespace stockdp
