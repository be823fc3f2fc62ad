#pragma once

// Seeded Monte Carlo evaluation of inventory policies.

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "stockdp/grid.hpp"
#include "stockdp/model.hpp"
#include "stockdp/structure.hpp"

namespace stockdp {

using Policy = std::variant<PolicyTable, StructuredPolicy>;

/// Order placed by a policy at state x in stage t. Tables order nothing below
/// x_min and throw ConstraintError at off-grid states.
double policy_order(const Policy& policy, double x, int stage);

/// Steps a finite-horizon structured policy runs for, or nullopt.
std::optional<int> policy_horizon(const Policy& policy);

struct SimConfig {
  std::uint64_t seed = 1;
  std::int64_t n_paths = 10000;
  /// Stages simulated per path; 0 picks the smallest cap with
  /// alpha^cap c_max / (1 - alpha) <= discount_tail_epsilon.
  int horizon_cap = 0;
  double discount_tail_epsilon = 1e-8;
};

struct SimResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t n_paths = 0;
  double truncation_bias_bound = 0.0;
  int horizon = 0;  ///< stages actually simulated
};

/// Independent uniform stream for path `path` under `seed`.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path);
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

 private:
  std::mt19937_64 engine_;
};

/// Inverse-CDF draw over the sorted atoms.
double sample_demand(const DemandDistribution& demand, double u);

/// sum_{t < horizon} alpha^t c(x_t, a_t), with c the expected one-step cost.
/// Throws ConstraintError naming the state and stage of an infeasible order.
double simulate_path(double x0, const Policy& policy, const ModelSpec& spec, PathRng& rng, int horizon);

/// Largest c(x, phi(x)) over grid states, across every stage of the policy.
double max_stage_cost(const Policy& policy, const ModelSpec& spec, const Grid& grid);

/// Smallest H >= 1 with alpha^H c_max / (1 - alpha) <= eps (1 when alpha = 0).
int auto_horizon(double alpha, double c_max, double eps);

/// Sample mean over n_paths independent streams. `grid` bounds c_max for the
/// truncation bias and the automatic horizon.
SimResult evaluate_policy_mc(double x0, const Policy& policy, const ModelSpec& spec, const SimConfig& cfg,
                             const Grid& grid);

struct PairedDifference {
  std::size_t first = 0;
  std::size_t second = 0;
  double mean = 0.0;  ///< mean of cost(first) - cost(second)
  double std_error = 0.0;
  double ci_low = 0.0;  ///< 95% normal interval
  double ci_high = 0.0;
};

struct Comparison {
  std::vector<SimResult> results;   ///< per policy, same order as the input
  std::vector<std::size_t> ranking; ///< policy indices by increasing mean cost
  std::vector<PairedDifference> pairs;  ///< every i < j
  int horizon = 0;
};

/// Runs every policy on identical demand streams.
Comparison compare_policies(double x0, const std::vector<Policy>& policies, const ModelSpec& spec,
                            const SimConfig& cfg, const Grid& grid);

/// Worker count: STOCKDP_THREADS if set and positive, else hardware threads.
unsigned worker_count();

}  // namespace stockdp
