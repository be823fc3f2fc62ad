#include "stockdp/structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace stockdp {

std::string to_string(const StageCount& n) { return n ? std::to_string(*n) : std::string("inf"); }

StructuredPolicy StructuredPolicy::stationary(double s, double S) {
  if (s > S) throw std::invalid_argument("(s, S) policy needs s <= S");
  StructuredPolicy p;
  p.kind = Kind::SS;
  p.ss = {s, S};
  return p;
}

StructuredPolicy StructuredPolicy::abridged(std::vector<Threshold> thresholds, int tail, int horizon) {
  if (tail < 0 || horizon < tail || static_cast<int>(thresholds.size()) != horizon - tail)
    throw std::invalid_argument("(s_t, S_t, n, N) policy needs N - n thresholds");
  for (const auto& t : thresholds)
    if (t.s > t.S) throw std::invalid_argument("(s, S) policy needs s <= S");
  StructuredPolicy p;
  p.kind = Kind::SStN;
  p.thresholds = std::move(thresholds);
  p.tail = tail;
  p.horizon = horizon;
  return p;
}

namespace {

double threshold_order(const Threshold& t, double x) {
  // States reached by S - d arithmetic may sit a rounding error off s.
  const double slack = 1e-9 * std::max(1.0, std::abs(t.s));
  return x < t.s - slack ? t.S - x : 0.0;
}

}  // namespace

double StructuredPolicy::order(double x, int stage) const {
  switch (kind) {
    case Kind::NeverOrder:
      return 0.0;
    case Kind::SS:
      return threshold_order(ss, x);
    case Kind::SStN:
      if (stage < 0 || stage >= horizon) throw std::out_of_range("stage outside the policy horizon");
      if (stage >= horizon - tail) return 0.0;
      return threshold_order(thresholds[static_cast<std::size_t>(stage)], x);
  }
  return 0.0;
}

std::string StructuredPolicy::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::NeverOrder:
      os << "never-order";
      break;
    case Kind::SS:
      os << "(s,S)=(" << ss.s << "," << ss.S << ")";
      break;
    case Kind::SStN:
      os << "(s_t,S_t,n,N) n=" << tail << " N=" << horizon;
      break;
  }
  return os.str();
}

PolicyTable to_table(const StructuredPolicy& policy, const Grid& grid, int stage) {
  std::vector<std::int64_t> steps(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double a = policy.order(grid[static_cast<std::ptrdiff_t>(i)], stage);
    if (a == 0.0) continue;
    const auto k = grid.steps(a);
    if (!k) throw GridMismatch("policy threshold S is not a grid point");
    steps[i] = *k;
  }
  return PolicyTable(grid, std::move(steps));
}

double alpha_star(const HoldingCost& h, double c_bar) {
  if (!(c_bar > 0.0)) throw std::invalid_argument("c_bar must be > 0");
  if (!h.violations().empty()) throw std::invalid_argument(h.violations().front());
  const double k = h.left_slope_magnitude();
  if (std::isinf(k)) return -kInf;
  return 1.0 - k / c_bar;
}

StageCount n_alpha_formula(double a_star, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  if (std::isnan(a_star)) throw DomainError("alpha* is NaN");
  if (a_star < 0.0) return 0;
  if (alpha <= a_star) return std::nullopt;
  const double target = a_star / (1.0 - a_star);
  double sum = 0.0;
  double power = 1.0;
  for (int t = 1;; ++t) {
    power *= alpha;
    const double next = sum + power;
    if (target < next) return t;
    if (next == sum) throw std::overflow_error("N_alpha exceeds the representable range");
    sum = next;
  }
}

namespace {

using Pmf = std::vector<std::pair<double, double>>;

// Merges support points that agree to rounding.
void normalize(Pmf& pmf, double prune) {
  std::sort(pmf.begin(), pmf.end());
  Pmf out;
  out.reserve(pmf.size());
  for (const auto& [d, p] : pmf) {
    if (!out.empty() && std::abs(out.back().first - d) <= 1e-9 * std::max(1.0, std::abs(d)))
      out.back().second += p;
    else
      out.emplace_back(d, p);
  }
  std::erase_if(out, [&](const auto& e) { return e.second < prune; });
  pmf = std::move(out);
}

Pmf convolve(const Pmf& a, const Pmf& b, double prune) {
  Pmf out;
  out.reserve(a.size() * b.size());
  for (const auto& [da, pa] : a)
    for (const auto& [db, pb] : b) out.emplace_back(da + db, pa * pb);
  normalize(out, prune);
  return out;
}

double expect_holding(const HoldingCost& h, const Pmf& pmf, double x) {
  double e = 0.0;
  for (const auto& [d, p] : pmf) e += p * h(x - d);
  return e;
}

}  // namespace

StageCount n_alpha_oracle(const ModelSpec& spec, const NAlphaOracleOptions& opts) {
  const double alpha = spec.alpha;
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  const double c = spec.c_bar;
  const double k = spec.h.left_slope_magnitude();
  if (std::isinf(k)) return 0;

  const double x1 = opts.x_probe;
  const double x2 = 2.0 * opts.x_probe;
  Pmf demand;
  for (const auto& atom : spec.demand.atoms()) demand.emplace_back(atom.d, atom.p);
  normalize(demand, 0.0);
  Pmf cumulative = demand;  // S_{t+1}

  double f1 = c * x1;
  double f2 = c * x2;
  double partial = 0.0;  // sum_{i=0}^t alpha^i
  double power = 1.0;
  const bool never_negative = c - k / (1.0 - alpha) >= 0.0;
  for (int t = 0;; ++t) {
    partial += power;
    const double analytic = c - k * partial;
    if (t <= opts.t_max) {
      if (t > 0) cumulative = convolve(cumulative, demand, opts.prune);
      f1 += power * expect_holding(spec.h, cumulative, x1);
      f2 += power * expect_holding(spec.h, cumulative, x2);
      const double numeric = (f1 - f2) / (x1 - x2);
      const double band = 1e-9 * (c + k * partial);
      if (std::abs(analytic) > band && (analytic < 0.0) != (numeric < 0.0)) {
        std::ostringstream os;
        os << "N_alpha oracle: slope sign disagreement at t=" << t << " (analytic " << analytic
           << ", numeric " << numeric << ")";
        throw OracleError(os.str());
      }
    }
    if (analytic < 0.0) return t;
    if (never_negative && t >= opts.t_max) return std::nullopt;
    power *= alpha;
    if (power == 0.0 && !never_negative && t > opts.t_max)
      throw std::overflow_error("N_alpha exceeds the representable range");
  }
}

SSThresholds extract_sS(const GFunction& f, double K) {
  const auto& v = f.values;
  if (v.empty()) throw std::invalid_argument("extract_sS: empty function");
  const auto min_it = std::min_element(v.begin(), v.end());
  const auto max_it = std::max_element(v.begin(), v.end());
  const double fS = *min_it;
  const double eps = 1e-9 * (1.0 + std::abs(fS) + K);
  if (!std::isfinite(fS)) throw ExtractionError("extract_sS: minimum is not finite");
  if (*max_it - fS <= eps) return {f.grid.x_min(), f.grid.x_min(), true};
  const auto S_idx = static_cast<std::size_t>(min_it - v.begin());
  if (S_idx == 0 || S_idx + 1 == v.size()) {
    std::ostringstream os;
    os << "extract_sS: minimum at grid boundary x=" << f.grid[static_cast<std::ptrdiff_t>(S_idx)]
       << "; widen the grid";
    throw ExtractionError(os.str());
  }
  std::size_t s_idx = 0;
  while (!(v[s_idx] <= K + fS + eps)) ++s_idx;
  return {f.grid[static_cast<std::ptrdiff_t>(s_idx)], f.grid[static_cast<std::ptrdiff_t>(S_idx)], false};
}

namespace {

struct Worst {
  double value = -kInf;
  std::size_t x = 0, z = 0, y = 0;
  void offer(double v, std::size_t i, std::size_t j, std::size_t l) {
    if (v > value || std::isnan(v)) {
      value = std::isnan(v) ? kInf : v;
      x = i;
      z = j;
      y = l;
    }
  }
};

double triple_violation(const std::vector<double>& f, double K, std::size_t x, std::size_t z, std::size_t y) {
  const double span = static_cast<double>(y - x);
  const double theta = static_cast<double>(y - z) / span;
  const double rest = static_cast<double>(z - x) / span;
  return f[z] - theta * f[x] - rest * f[y] - rest * K;
}

}  // namespace

KConvexityResult k_convexity_check(const GFunction& g, double K, double tolerance, KConvexityMode mode) {
  const auto& f = g.values;
  const std::size_t n = f.size();
  Worst worst;
  if (mode == KConvexityMode::Exhaustive) {
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t z = x + 1; z < n; ++z)
        for (std::size_t y = z + 1; y < n; ++y) worst.offer(triple_violation(f, K, x, z, y), x, z, y);
  } else {
    // f(z) - theta f(x) - (1-theta)(f(y) + K) = (1-theta) [f(z) + (y-z) m(x,z) - f(y) - K]
    // with m(x,z) the secant slope, so the steepest secant decides each (z, y).
    for (std::size_t z = 1; z + 1 < n; ++z) {
      double best = -kInf;
      std::size_t arg = 0;
      for (std::size_t x = 0; x < z; ++x) {
        const double m = (f[z] - f[x]) / static_cast<double>(z - x);
        if (m > best || std::isnan(m)) {
          best = std::isnan(m) ? kInf : m;
          arg = x;
        }
      }
      for (std::size_t y = z + 1; y < n; ++y) {
        const double reduced = f[z] + static_cast<double>(y - z) * best - f[y] - K;
        if (reduced > tolerance || std::isnan(reduced)) {
          for (std::size_t x = 0; x < z; ++x) worst.offer(triple_violation(f, K, x, z, y), x, z, y);
        } else {
          worst.offer(triple_violation(f, K, arg, z, y), arg, z, y);
        }
      }
    }
  }
  KConvexityResult r;
  if (worst.value == -kInf) return r;
  r.worst_violation = worst.value;
  r.pass = worst.value <= tolerance;
  r.witness = std::array<double, 3>{g.grid[static_cast<std::ptrdiff_t>(worst.x)],
                                    g.grid[static_cast<std::ptrdiff_t>(worst.z)],
                                    g.grid[static_cast<std::ptrdiff_t>(worst.y)]};
  return r;
}

GFunction order_envelope(const GFunction& f, double K, double x_bar) {
  if (std::isfinite(x_bar) && std::abs(x_bar - f.grid.x_max()) > 1e-6 * f.grid.step())
    throw std::invalid_argument("order_envelope: x_bar must be +inf or the grid top");
  GFunction out = f;
  double suffix = kInf;
  for (std::size_t i = f.values.size(); i-- > 0;) {
    out.values[i] = std::min(f.values[i], K + suffix);
    suffix = std::min(suffix, f.values[i]);
  }
  return out;
}

namespace {

void require_supported(const ModelSpec& spec) {
  const auto kind = spec.regime.kind;
  if (spec.shortfall != Shortfall::Backorders ||
      (kind != ConstraintRegime::Kind::U && kind != ConstraintRegime::Kind::BS))
    throw UnsupportedError("structured policies are available for regimes U and BS with backorders only (got " +
                           to_string(kind) + ", " + to_string(spec.shortfall) + ")");
}

}  // namespace

StructuredPolicy build_structured_policy(const ModelSpec& spec, const FiniteHorizonSolution& sol) {
  require_supported(spec);
  const double a_star = alpha_star(spec.h, spec.c_bar);
  const int N = sol.horizon();
  if (spec.alpha <= a_star) return StructuredPolicy::never_order();
  const int n = *n_alpha_formula(a_star, spec.alpha);
  if (N <= n) return StructuredPolicy::never_order();
  std::vector<Threshold> th;
  th.reserve(static_cast<std::size_t>(N - n));
  for (int t = 0; t < N - n; ++t) {
    const auto ss = extract_sS(sol.g[static_cast<std::size_t>(N - t - 1)], spec.K);
    th.push_back({ss.s, ss.S});
  }
  return StructuredPolicy::abridged(std::move(th), n, N);
}

StructuredPolicy build_structured_policy(const ModelSpec& spec, const InfiniteHorizonResult& sol) {
  require_supported(spec);
  if (!sol.converged()) throw std::invalid_argument("structured policy needs a converged solve");
  const double a_star = alpha_star(spec.h, spec.c_bar);
  if (spec.alpha <= a_star) return StructuredPolicy::never_order();
  const auto ss = extract_sS(sol.g, spec.K);
  return StructuredPolicy::stationary(ss.s, ss.S);
}

std::string RegimeLabel::str() const {
  switch (kind) {
    case Kind::R0:
      return "R_0";
    case Kind::Rn:
      return "R_" + std::to_string(n);
    case Kind::RInf:
      return "R_inf";
  }
  return "";
}

RegimeLabel classify_regime(double a_star, double alpha, std::optional<int> horizon) {
  if (horizon && *horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  const auto n = n_alpha_formula(a_star, alpha);
  if (!n) return {RegimeLabel::Kind::RInf, 0};
  if (*n == 0) return {RegimeLabel::Kind::R0, 0};
  if (!horizon) return {RegimeLabel::Kind::R0, 0};
  return {RegimeLabel::Kind::Rn, *n};
}

SandwichResult sandwich_check(const ValueFunction& v, const ValueFunction& v0, const ModelSpec& spec,
                              std::optional<int> horizon, double slack) {
  if (!(v.grid() == v0.grid())) throw GridMismatch("sandwich_check: grids differ");
  SandwichResult r;
  r.bound = horizon ? spec.K * (1.0 - std::pow(spec.alpha, *horizon)) / (1.0 - spec.alpha)
                    : spec.K / (1.0 - spec.alpha);
  r.lower_margin = kInf;
  r.upper_margin = kInf;
  for (std::size_t i = 0; i < v.values().size(); ++i) {
    if (!std::isfinite(v[i]) && !std::isfinite(v0[i])) continue;
    r.lower_margin = std::min(r.lower_margin, v[i] - v0[i]);
    r.upper_margin = std::min(r.upper_margin, v0[i] + r.bound - v[i]);
  }
  r.pass = r.lower_margin >= -slack && r.upper_margin >= -slack;
  return r;
}

ThresholdForm threshold_form(const PolicyTable& policy, std::size_t lo, std::size_t hi) {
  if (hi >= policy.size() || lo > hi) throw std::out_of_range("threshold_form: bad index range");
  const Grid& grid = policy.grid();
  ThresholdForm r;
  std::size_t i = lo;
  std::optional<std::int64_t> target;  // S in steps from x_min
  for (; i <= hi && policy.order_steps()[i] > 0; ++i) {
    const std::int64_t up = static_cast<std::int64_t>(i) + policy.order_steps()[i];
    if (target && *target != up) return r;
    target = up;
  }
  r.orders = i > lo;
  const std::size_t s_idx = i;
  for (; i <= hi; ++i)
    if (policy.order_steps()[i] != 0) return r;
  r.threshold = true;
  r.s = grid[static_cast<std::ptrdiff_t>(s_idx)];
  r.S = target ? grid[static_cast<std::ptrdiff_t>(*target)] : r.s;
  if (r.orders && r.S < r.s) r.threshold = false;
  return r;
}

}  // namespace stockdp
