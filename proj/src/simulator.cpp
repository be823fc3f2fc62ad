#include "stockdp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace stockdp {

namespace {

// Neumaier-compensated sum in index order.
double compensated_sum(const std::vector<double>& xs) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

struct Moments {
  double mean;
  double std_error;
};

Moments moments(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = compensated_sum(xs) / n;
  if (xs.size() < 2) return {mean, 0.0};
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
  const double var = compensated_sum(sq) / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

// Runs body(i) for i in [0, n) on up to worker_count() threads. The first
// exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(std::int64_t n, Body body) {
  const auto workers = static_cast<std::int64_t>(std::min<std::int64_t>(worker_count(), std::max<std::int64_t>(n, 1)));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> threads;
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (std::int64_t w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    threads.emplace_back([&, lo, hi] {
      try {
        for (std::int64_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

struct Horizon {
  int stages;
  double bias;
};

Horizon choose_horizon(const std::vector<const Policy*>& policies, const ModelSpec& spec, const SimConfig& cfg,
                       const Grid& grid) {
  std::optional<int> finite;
  for (const Policy* p : policies) {
    const auto n = policy_horizon(*p);
    if (!n) continue;
    if (finite && *finite != *n) throw std::invalid_argument("policies have different finite horizons");
    finite = n;
  }
  if (finite) return {*finite, 0.0};
  if (spec.alpha == 0.0) return {1, 0.0};
  double c_max = 0.0;
  for (const Policy* p : policies) c_max = std::max(c_max, max_stage_cost(*p, spec, grid));
  const int H = cfg.horizon_cap > 0 ? cfg.horizon_cap : auto_horizon(spec.alpha, c_max, cfg.discount_tail_epsilon);
  return {H, std::pow(spec.alpha, H) * c_max / (1.0 - spec.alpha)};
}

void check_config(const SimConfig& cfg) {
  if (cfg.n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
  if (cfg.horizon_cap < 0) throw std::invalid_argument("horizon_cap must be >= 0");
  if (!(cfg.discount_tail_epsilon > 0.0)) throw std::invalid_argument("discount_tail_epsilon must be > 0");
}

}  // namespace

unsigned worker_count() {
  if (const char* env = std::getenv("STOCKDP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

double policy_order(const Policy& policy, double x, int stage) {
  if (const auto* sp = std::get_if<StructuredPolicy>(&policy)) return sp->order(x, stage);
  const auto& table = std::get<PolicyTable>(policy);
  const Grid& grid = table.grid();
  if (x < grid.x_min() - 1e-6 * grid.step()) return 0.0;
  const auto i = grid.index_of(x);
  if (!i) {
    std::ostringstream os;
    os << "policy table has no entry for state x=" << x << " at stage " << stage;
    throw ConstraintError(os.str());
  }
  return table.order(static_cast<std::size_t>(*i));
}

std::optional<int> policy_horizon(const Policy& policy) {
  if (const auto* sp = std::get_if<StructuredPolicy>(&policy))
    if (sp->kind == StructuredPolicy::Kind::SStN) return sp->horizon;
  return std::nullopt;
}

namespace {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

// The (seed, path) key is hashed down to a single engine seed.
PathRng::PathRng(std::uint64_t seed, std::uint64_t path)
    : engine_(mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ (path + 0x632be59bd9b4e019ULL))) {}

double PathRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double sample_demand(const DemandDistribution& demand, double u) {
  const auto& atoms = demand.atoms();
  double cum = 0.0;
  for (const auto& atom : atoms) {
    cum += atom.p;
    if (u < cum) return atom.d;
  }
  return atoms.back().d;
}

double simulate_path(double x0, const Policy& policy, const ModelSpec& spec, PathRng& rng, int horizon) {
  double x = x0;
  double discount = 1.0;
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const double a = policy_order(policy, x, t);
    if (!feasible_actions(x, spec.regime, spec.shortfall).contains(a)) {
      std::ostringstream os;
      os << "infeasible order a=" << a << " at state x=" << x << ", stage " << t;
      throw ConstraintError(os.str());
    }
    total += discount * one_step_cost(x, a, spec);
    x = transition(x, a, sample_demand(spec.demand, rng.uniform()), spec);
    discount *= spec.alpha;
  }
  return total;
}

double max_stage_cost(const Policy& policy, const ModelSpec& spec, const Grid& grid) {
  const int stages = policy_horizon(policy).value_or(1);
  double c_max = 0.0;
  for (int t = 0; t < stages; ++t)
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = grid[static_cast<std::ptrdiff_t>(i)];
      const double c = one_step_cost(x, policy_order(policy, x, t), spec);
      if (std::isfinite(c)) c_max = std::max(c_max, c);
    }
  return c_max;
}

int auto_horizon(double alpha, double c_max, double eps) {
  if (alpha == 0.0) return 1;
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  const double ratio = eps * (1.0 - alpha) / std::max(c_max, 1e-300);
  if (ratio >= 1.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(std::log(ratio) / std::log(alpha))));
}

SimResult evaluate_policy_mc(double x0, const Policy& policy, const ModelSpec& spec, const SimConfig& cfg,
                             const Grid& grid) {
  check_config(cfg);
  const Horizon h = choose_horizon({&policy}, spec, cfg, grid);
  std::vector<double> costs(static_cast<std::size_t>(cfg.n_paths));
  parallel_for(cfg.n_paths, [&](std::int64_t p) {
    PathRng rng(cfg.seed, static_cast<std::uint64_t>(p));
    costs[static_cast<std::size_t>(p)] = simulate_path(x0, policy, spec, rng, h.stages);
  });
  const Moments m = moments(costs);
  return {m.mean, m.std_error, cfg.n_paths, h.bias, h.stages};
}

Comparison compare_policies(double x0, const std::vector<Policy>& policies, const ModelSpec& spec,
                            const SimConfig& cfg, const Grid& grid) {
  if (policies.size() < 2) throw std::invalid_argument("compare needs at least 2 policies");
  check_config(cfg);
  std::vector<const Policy*> ptrs;
  for (const auto& p : policies) ptrs.push_back(&p);
  const Horizon h = choose_horizon(ptrs, spec, cfg, grid);
  const std::size_t n = static_cast<std::size_t>(cfg.n_paths);
  std::vector<std::vector<double>> costs(policies.size(), std::vector<double>(n));
  parallel_for(cfg.n_paths, [&](std::int64_t p) {
    for (std::size_t k = 0; k < policies.size(); ++k) {
      PathRng rng(cfg.seed, static_cast<std::uint64_t>(p));
      costs[k][static_cast<std::size_t>(p)] = simulate_path(x0, policies[k], spec, rng, h.stages);
    }
  });

  Comparison out;
  out.horizon = h.stages;
  for (const auto& c : costs) {
    const Moments m = moments(c);
    out.results.push_back({m.mean, m.std_error, cfg.n_paths, h.bias, h.stages});
  }
  out.ranking.resize(policies.size());
  std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return out.results[a].mean < out.results[b].mean; });
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < policies.size(); ++i)
    for (std::size_t j = i + 1; j < policies.size(); ++j) {
      for (std::size_t p = 0; p < n; ++p) diff[p] = costs[i][p] - costs[j][p];
      const Moments m = moments(diff);
      out.pairs.push_back({i, j, m.mean, m.std_error, m.mean - 1.96 * m.std_error, m.mean + 1.96 * m.std_error});
    }
  return out;
}

}  // namespace stockdp
