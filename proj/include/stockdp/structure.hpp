#pragma once

// Structure of optimal policies for the (U, BS) backorder models: the critical
// discount factor alpha*, the never-order tail length N_alpha, (s, S)
// thresholds of K-convex G-functions, and the regime map over (alpha*, alpha).

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stockdp/grid.hpp"
#include "stockdp/model.hpp"
#include "stockdp/solver.hpp"

namespace stockdp {

/// Structured policy requested outside (U, BS) with backorders.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (s, S) extraction is not reliable on this grid.
class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The analytic and numeric N_alpha slope signs disagree.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Number of stages, or nullopt for +inf.
using StageCount = std::optional<int>;
std::string to_string(const StageCount& n);

struct Threshold {
  double s;
  double S;
  bool operator==(const Threshold&) const = default;
};

struct StructuredPolicy {
  enum class Kind { NeverOrder, SS, SStN };
  Kind kind = Kind::NeverOrder;
  Threshold ss{0.0, 0.0};             ///< kind SS
  std::vector<Threshold> thresholds;  ///< kind SStN, one per stage 0 .. N-n-1
  int tail = 0;                       ///< n: trailing never-order stages
  int horizon = 0;                    ///< N

  static StructuredPolicy never_order() { return {}; }
  static StructuredPolicy stationary(double s, double S);
  static StructuredPolicy abridged(std::vector<Threshold> thresholds, int tail, int horizon);

  /// Order at state x in stage t. (s, S) controls order S - x when x < s.
  double order(double x, int stage = 0) const;
  bool stationary_kind() const { return kind != Kind::SStN; }
  std::string describe() const;
};

/// Expands a structured control at `stage` onto a grid.
PolicyTable to_table(const StructuredPolicy& policy, const Grid& grid, int stage = 0);

/// alpha* = 1 - k_h / c_bar; -inf when k_h is infinite.
double alpha_star(const HoldingCost& h, double c_bar);

/// min{t : alpha*/(1 - alpha*) < sum_{i=1}^t alpha^i}; 0 when alpha* < 0 and
/// +inf when alpha <= alpha*. Throws DomainError for alpha outside [0, 1).
StageCount n_alpha_formula(double alpha_star, double alpha);

struct NAlphaOracleOptions {
  int t_max = 2000;
  double x_probe = -1e6;
  /// Probability mass below this is dropped from the cumulative demand pmf.
  double prune = 1e-15;
};

/// First t whose limiting slope c_bar - k_h sum_{i=0}^t alpha^i is negative.
/// For t <= t_max the sign is cross-checked against the secant slope of
/// f_t(x) = c_bar x + sum_{i=0}^t alpha^i E h(x - S_{i+1}) at two deep
/// probes, with S_i the i-fold demand convolution. Throws OracleError on a
/// sign disagreement.
StageCount n_alpha_oracle(const ModelSpec& spec, const NAlphaOracleOptions& opts = {});

struct SSThresholds {
  double s = 0.0;
  double S = 0.0;
  bool degenerate = false;  ///< f constant on the grid
};

/// S = smallest grid argmin of f; s = smallest grid x with
/// f(x) <= K + f(S) + 1e-9 (1 + |f(S)| + K). Throws ExtractionError when the
/// minimum sits on a grid edge.
SSThresholds extract_sS(const GFunction& f, double K);

enum class KConvexityMode { Exhaustive, Fast };

struct KConvexityResult {
  bool pass = true;
  /// Largest f(z) - [theta f(x) + (1-theta) f(y) + (1-theta) K] found.
  /// Exact in exhaustive mode and whenever the fast verdict is a failure.
  double worst_violation = 0.0;
  std::optional<std::array<double, 3>> witness;  ///< (x, z, y) of the worst violation
};

/// Checks every grid triple x < z < y, theta = (y - z)/(y - x).
/// Fast mode uses, for each (z, y), the steepest left secant into z, which
/// decides the triple condition exactly, and only scans x for failing pairs.
KConvexityResult k_convexity_check(const GFunction& f, double K, double tolerance,
                                   KConvexityMode mode = KConvexityMode::Fast);

/// g(x) = min{f(x), K + min_{0 < a <= cap(x)} f(x + a)} over grid orders.
/// x_bar is +inf or the grid top.
GFunction order_envelope(const GFunction& f, double K, double x_bar = kInf);

StructuredPolicy build_structured_policy(const ModelSpec& spec, const FiniteHorizonSolution& sol);
StructuredPolicy build_structured_policy(const ModelSpec& spec, const InfiniteHorizonResult& sol);

struct RegimeLabel {
  enum class Kind { R0, Rn, RInf };
  Kind kind = Kind::R0;
  int n = 0;
  std::string str() const;
  bool operator==(const RegimeLabel&) const = default;
};

/// horizon: any finite N, or nullopt for the infinite horizon.
RegimeLabel classify_regime(double alpha_star, double alpha, std::optional<int> horizon);

struct SandwichResult {
  bool pass = true;
  double lower_margin = 0.0;  ///< min (v - v0)
  double upper_margin = 0.0;  ///< min (v0 + bound - v)
  double bound = 0.0;
};

/// v0 <= v <= v0 + K (1 - alpha^N)/(1 - alpha), or K/(1 - alpha) when
/// horizon is nullopt, pointwise within slack.
SandwichResult sandwich_check(const ValueFunction& v, const ValueFunction& v0, const ModelSpec& spec,
                              std::optional<int> horizon, double slack);

struct ThresholdForm {
  bool threshold = false;  ///< orders exactly (S - x) 1{x < s} on [lo, hi]
  bool orders = false;     ///< some state in range orders
  double s = 0.0;
  double S = 0.0;
};

/// Tests whether a table acts as an (s, S) control on grid indices [lo, hi].
ThresholdForm threshold_form(const PolicyTable& policy, std::size_t lo, std::size_t hi);

}  // namespace stockdp
