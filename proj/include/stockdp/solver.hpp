#pragma once

// Value iteration for the finite- and infinite-horizon optimality equations
//
//   v_{t+1}(x) = min{ G_t(x), K + min_{a in A(x), a > 0} G_t(x + a) } - c_bar x
//   G_t(x)     = c_bar x + E h(T(x - D)) + alpha E v_t(T(x - D))
//
// on a uniform grid. Orders are restricted to grid multiples with
// x + a <= x_max; values below x_min are extrapolated linearly.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stockdp/grid.hpp"
#include "stockdp/model.hpp"

namespace stockdp {

/// Precomputed per-grid data shared by every backup: demand in steps,
/// expected holding cost at each post-order level, and the order cap.
class GridModel {
 public:
  /// Throws std::invalid_argument when the grid is incompatible with spec.
  GridModel(const ModelSpec& spec, const Grid& grid);

  const ModelSpec& spec() const { return spec_; }
  const Grid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }

  /// E h(T(x_i - D))
  double expected_holding(std::size_t i) const { return holding_[i]; }
  /// Largest feasible order at x_i, in steps, after the x_max truncation.
  std::int64_t max_order_steps(std::size_t i) const { return cap_[i]; }
  /// Index reached from x_i by demand atom k (negative below the grid).
  std::ptrdiff_t successor(std::size_t i, std::size_t k) const;
  const std::vector<std::int64_t>& demand_steps() const { return demand_steps_; }
  const std::vector<double>& demand_probs() const { return probs_; }

  /// One-step cost c(x_i, a) for an order of `steps` grid steps.
  double cost(std::size_t i, std::int64_t steps) const;

 private:
  ModelSpec spec_;
  Grid grid_;
  std::vector<std::int64_t> demand_steps_;
  std::vector<double> probs_;
  std::vector<double> holding_;
  std::vector<std::int64_t> cap_;
};

enum class Verdict { Converging, Diverging, Undetermined };
std::string to_string(Verdict v);

struct SolverOptions {
  double tol = 1e-6;
  /// Divergence ceiling; default 1e12 (1 + K + c_bar + max finite h on grid).
  std::optional<double> v_max;
  int max_iterations = 200000;
  /// Stage increments inspected by the divergence test.
  int divergence_window = 10;
};

double default_ceiling(const GridModel& model);

/// Sup-norm successive difference at which iteration stops:
/// tol (1 - alpha) / (2 alpha).
double stopping_threshold(double tol, double alpha);

GFunction g_from_value(const ValueFunction& v, const GridModel& model);

struct Backup {
  ValueFunction value;
  PolicyTable policy;
};

/// One Bellman step from G. Ties go to the smallest order, so a = 0 wins
/// whenever ordering does not strictly lower the cost.
Backup bellman_backup(const GFunction& g, const GridModel& model);

struct FiniteHorizonSolution {
  std::vector<ValueFunction> values;  ///< v_0 .. v_N (index = stages to go)
  std::vector<GFunction> g;           ///< G_0 .. G_{N-1}, G_k built from v_k
  std::vector<PolicyTable> policies;  ///< controls phi_0 .. phi_{N-1}; phi_t uses G_{N-t-1}
  int horizon() const { return static_cast<int>(policies.size()); }
};

FiniteHorizonSolution solve_finite_horizon(const GridModel& model, int horizon);

struct InfiniteHorizonResult {
  Verdict verdict = Verdict::Undetermined;
  ValueFunction value;
  GFunction g;         ///< G built from `value`
  PolicyTable policy;  ///< greedy with respect to g
  int iterations = 0;
  std::vector<double> residuals;  ///< sup |v_{k+1} - v_k|
  std::vector<double> sup_norms;  ///< sup |v_k|, starting with v_0 = 0
  bool converged() const { return verdict == Verdict::Converging; }
};

InfiniteHorizonResult solve_infinite_horizon(const GridModel& model, const SolverOptions& opts = {});

/// Same as solve_infinite_horizon with K forced to 0.
InfiniteHorizonResult solve_no_setup(const ModelSpec& spec, const Grid& grid,
                                     const SolverOptions& opts = {});
FiniteHorizonSolution solve_no_setup_finite(const ModelSpec& spec, const Grid& grid, int horizon);

struct PolicyEvaluation {
  Verdict verdict = Verdict::Undetermined;
  ValueFunction value;
  int iterations = 0;
};

/// Fixed-policy expected discounted cost by iteration to the same stopping
/// rule as the optimal solve. Throws ConstraintError for infeasible orders.
PolicyEvaluation evaluate_policy_dp(const PolicyTable& policy, const GridModel& model,
                                    const SolverOptions& opts = {});

/// max_x |v(x) - [c(x, phi(x)) + alpha E v(T(x + phi(x) - D))]|
double bellman_residual(const ValueFunction& v, const PolicyTable& policy, const GridModel& model);

struct DivergenceOptions {
  int window = 10;
  /// Converging when the last increment is at most this (absolute).
  double residual_threshold = 1e-9;
};

/// Classifies a trace of sup-norm values. Diverging when the last value
/// exceeds the ceiling and the last `window` increments are nondecreasing
/// (non-finite increments count as +inf).
Verdict detect_divergence(std::span<const double> trace, double ceiling,
                          const DivergenceOptions& opts = {});

}  // namespace stockdp
