#include "stockdp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace stockdp {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? "; " : "") << items[i];
  return os.str();
}

double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) return kInf;
    m = std::max(m, std::abs(x));
  }
  return m;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!std::isfinite(d)) return kInf;
    m = std::max(m, d);
  }
  return m;
}

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw GridMismatch("table grid does not match the model grid");
}

ValueFunction as_converged(const ValueFunction& v) {
  return ValueFunction(v.grid(), v.values(), std::nullopt);
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Converging: return "converging";
    case Verdict::Diverging: return "diverging";
    case Verdict::Undetermined: return "undetermined";
  }
  return "?";
}

// ---------------------------------------------------------------------------

GridModel::GridModel(const ModelSpec& spec, const Grid& grid) : spec_(spec), grid_(grid) {
  if (auto bad = grid_violations(grid, spec); !bad.empty()) throw std::invalid_argument(join(bad));

  for (const auto& atom : spec.demand.atoms()) {
    demand_steps_.push_back(*grid.steps(atom.d));
    probs_.push_back(atom.p);
  }

  const auto n = grid.size();
  holding_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      const auto j = static_cast<std::ptrdiff_t>(i) - demand_steps_[k];
      const double h = spec.h(apply_shortfall(grid[j], spec.shortfall));
      if (h == kInf) {
        total = kInf;
        break;
      }
      total += probs_[k] * h;
    }
    holding_[i] = total;
  }

  std::int64_t order_cap = -1;
  if (spec.regime.bounded_orders_flag())
    order_cap = static_cast<std::int64_t>(std::floor(spec.regime.a_bar / grid.step() + 1e-9));
  cap_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto room = static_cast<std::int64_t>(n - 1 - i);
    cap_[i] = order_cap >= 0 ? std::min(room, order_cap) : room;
  }
}

std::ptrdiff_t GridModel::successor(std::size_t i, std::size_t k) const {
  const auto j = static_cast<std::ptrdiff_t>(i) - demand_steps_[k];
  if (spec_.shortfall == Shortfall::LostSales && j < 0) return 0;
  return j;
}

double GridModel::cost(std::size_t i, std::int64_t steps) const {
  const double a = grid_.step() * static_cast<double>(steps);
  return (steps > 0 ? spec_.K : 0.0) + spec_.c_bar * a + holding_[i + static_cast<std::size_t>(steps)];
}

double default_ceiling(const GridModel& model) {
  double hmax = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double h = model.spec().h(model.grid()[static_cast<std::ptrdiff_t>(i)]);
    if (std::isfinite(h)) hmax = std::max(hmax, h);
  }
  return 1e12 * (1.0 + model.spec().K + model.spec().c_bar + hmax);
}

double stopping_threshold(double tol, double alpha) {
  if (alpha <= 0.0) return kInf;
  return tol * (1.0 - alpha) / (2.0 * alpha);
}

// ---------------------------------------------------------------------------

GFunction g_from_value(const ValueFunction& v, const GridModel& model) {
  require_same_grid(v.grid(), model.grid());
  const auto& spec = model.spec();
  const auto& grid = model.grid();
  const auto& probs = model.demand_probs();
  GFunction g{grid, std::vector<double>(grid.size()), v.stage()};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double value = spec.c_bar * grid[static_cast<std::ptrdiff_t>(i)] + model.expected_holding(i);
    if (spec.alpha > 0.0 && std::isfinite(value)) {
      double cont = 0.0;
      for (std::size_t k = 0; k < probs.size(); ++k) cont += probs[k] * v.at_index(model.successor(i, k));
      value += spec.alpha * cont;
    }
    g.values[i] = value;
  }
  return g;
}

Backup bellman_backup(const GFunction& g, const GridModel& model) {
  require_same_grid(g.grid, model.grid());
  const auto& spec = model.spec();
  const auto& grid = model.grid();
  const auto n = grid.size();
  const auto& G = g.values;

  std::vector<double> v(n);
  std::vector<std::int64_t> order(n, 0);

  // Window (i, i + cap_i] slides left as i decreases; cap_i + i never grows
  // when i decreases. The deque holds candidate minimizers with increasing
  // index and strictly decreasing value, so its back is the window minimum
  // with the smallest index among ties.
  std::deque<std::size_t> window;
  for (std::size_t ii = n; ii-- > 0;) {
    if (ii + 1 < n) {
      const std::size_t j = ii + 1;
      while (!window.empty() && G[window.front()] >= G[j]) window.pop_front();
      window.push_front(j);
    }
    const auto right = ii + static_cast<std::size_t>(model.max_order_steps(ii));
    while (!window.empty() && window.back() > right) window.pop_back();

    double best = G[ii];
    if (!window.empty()) {
      const std::size_t j = window.back();
      const double ordered = spec.K + G[j];
      if (ordered < best) {
        best = ordered;
        order[ii] = static_cast<std::int64_t>(j - ii);
      }
    }
    v[ii] = best - spec.c_bar * grid[static_cast<std::ptrdiff_t>(ii)];
  }

  std::optional<int> stage;
  if (g.stage) stage = *g.stage + 1;
  return {ValueFunction(grid, std::move(v), stage), PolicyTable(grid, std::move(order))};
}

// ---------------------------------------------------------------------------

FiniteHorizonSolution solve_finite_horizon(const GridModel& model, int horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  FiniteHorizonSolution sol;
  sol.values.push_back(ValueFunction::zero(model.grid()));
  std::vector<PolicyTable> by_stages_to_go;
  for (int k = 0; k < horizon; ++k) {
    sol.g.push_back(g_from_value(sol.values.back(), model));
    auto b = bellman_backup(sol.g.back(), model);
    sol.values.push_back(std::move(b.value));
    by_stages_to_go.push_back(std::move(b.policy));
  }
  sol.policies.assign(by_stages_to_go.rbegin(), by_stages_to_go.rend());
  return sol;
}

InfiniteHorizonResult solve_infinite_horizon(const GridModel& model, const SolverOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  const double alpha = model.spec().alpha;
  const double ceiling = opts.v_max.value_or(default_ceiling(model));
  const double threshold = stopping_threshold(opts.tol, alpha);

  ValueFunction v = ValueFunction::zero(model.grid());
  std::vector<double> residuals;
  std::vector<double> sup_norms{0.0};

  if (alpha == 0.0) {
    auto g0 = g_from_value(v, model);
    auto b = bellman_backup(g0, model);
    sup_norms.push_back(sup_norm(b.value.values()));
    residuals.push_back(sup_diff(b.value.values(), v.values()));
    auto value = as_converged(b.value);
    auto g = g_from_value(value, model);
    return {Verdict::Converging, value, g, b.policy, 1, residuals, sup_norms};
  }

  for (int it = 1; it <= opts.max_iterations; ++it) {
    auto g = g_from_value(v, model);
    auto b = bellman_backup(g, model);
    residuals.push_back(sup_diff(b.value.values(), v.values()));
    sup_norms.push_back(sup_norm(b.value.values()));
    v = std::move(b.value);

    DivergenceOptions dopt;
    dopt.window = opts.divergence_window;
    if (detect_divergence(sup_norms, ceiling, dopt) == Verdict::Diverging)
      return {Verdict::Diverging, as_converged(v), g, b.policy, it, residuals, sup_norms};

    if (residuals.back() <= threshold) {
      auto value = as_converged(v);
      auto g_final = g_from_value(value, model);
      auto greedy = bellman_backup(g_final, model);
      g_final.stage = std::nullopt;
      return {Verdict::Converging, value, g_final, greedy.policy, it, residuals, sup_norms};
    }
  }
  auto g = g_from_value(v, model);
  auto b = bellman_backup(g, model);
  return {Verdict::Undetermined, as_converged(v), g, b.policy, opts.max_iterations, residuals,
          sup_norms};
}

InfiniteHorizonResult solve_no_setup(const ModelSpec& spec, const Grid& grid, const SolverOptions& opts) {
  ModelSpec free = spec;
  free.K = 0.0;
  return solve_infinite_horizon(GridModel(free, grid), opts);
}

FiniteHorizonSolution solve_no_setup_finite(const ModelSpec& spec, const Grid& grid, int horizon) {
  ModelSpec free = spec;
  free.K = 0.0;
  return solve_finite_horizon(GridModel(free, grid), horizon);
}

// ---------------------------------------------------------------------------

namespace {

void check_feasible(const PolicyTable& policy, const GridModel& model) {
  require_same_grid(policy.grid(), model.grid());
  for (std::size_t i = 0; i < policy.size(); ++i) {
    const auto a = policy.order_steps()[i];
    if (a < 0 || a > model.max_order_steps(i)) {
      std::ostringstream os;
      os << "policy orders " << policy.order(i) << " at state " << model.grid()[static_cast<std::ptrdiff_t>(i)]
         << ", outside the feasible grid actions";
      throw ConstraintError(os.str());
    }
  }
}

std::vector<double> policy_step(const ValueFunction& v, const PolicyTable& policy, const GridModel& model) {
  const auto g = g_from_value(v, model);
  const auto& spec = model.spec();
  const auto& grid = model.grid();
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto a = policy.order_steps()[i];
    out[i] = (a > 0 ? spec.K : 0.0) + g.values[i + static_cast<std::size_t>(a)] -
             spec.c_bar * grid[static_cast<std::ptrdiff_t>(i)];
  }
  return out;
}

}  // namespace

PolicyEvaluation evaluate_policy_dp(const PolicyTable& policy, const GridModel& model,
                                    const SolverOptions& opts) {
  check_feasible(policy, model);
  const double alpha = model.spec().alpha;
  const double ceiling = opts.v_max.value_or(default_ceiling(model));
  const double threshold = stopping_threshold(opts.tol, alpha);
  ValueFunction v = ValueFunction::zero(model.grid());
  if (alpha == 0.0)
    return {Verdict::Converging, ValueFunction(model.grid(), policy_step(v, policy, model), std::nullopt), 1};

  std::vector<double> sup_norms{0.0};
  DivergenceOptions dopt;
  dopt.window = opts.divergence_window;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    auto next = policy_step(v, policy, model);
    const double res = sup_diff(next, v.values());
    sup_norms.push_back(sup_norm(next));
    v = ValueFunction(model.grid(), std::move(next), std::nullopt);
    if (detect_divergence(sup_norms, ceiling, dopt) == Verdict::Diverging)
      return {Verdict::Diverging, v, it};
    if (res <= threshold) return {Verdict::Converging, v, it};
  }
  return {Verdict::Undetermined, v, opts.max_iterations};
}

double bellman_residual(const ValueFunction& v, const PolicyTable& policy, const GridModel& model) {
  check_feasible(policy, model);
  return sup_diff(policy_step(v, policy, model), v.values());
}

// ---------------------------------------------------------------------------

Verdict detect_divergence(std::span<const double> trace, double ceiling, const DivergenceOptions& opts) {
  if (trace.empty()) throw std::invalid_argument("divergence trace is empty");
  const std::size_t n = trace.size();
  const double last = trace[n - 1];

  auto increment = [&](std::size_t k) {
    const double d = trace[k] - trace[k - 1];
    return std::isfinite(d) ? d : kInf;
  };

  if (!std::isfinite(last) || last > ceiling) {
    const auto w = static_cast<std::size_t>(std::max(1, opts.window));
    if (n < w + 1) return Verdict::Undetermined;
    for (std::size_t k = n - w + 1; k < n; ++k)
      if (increment(k) < increment(k - 1)) return Verdict::Undetermined;
    return Verdict::Diverging;
  }
  if (n >= 2 && std::abs(increment(n - 1)) <= opts.residual_threshold) return Verdict::Converging;
  return Verdict::Undetermined;
}

}  // namespace stockdp
