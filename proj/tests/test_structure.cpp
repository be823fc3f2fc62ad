#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stockdp/solver.hpp"
#include "stockdp/structure.hpp"
#include "support/oracles.hpp"

using namespace stockdp;

namespace {

GFunction make_g(const Grid& grid, double (*f)(double)) {
  GFunction g{grid, {}, std::nullopt};
  for (std::size_t i = 0; i < grid.size(); ++i) g.values.push_back(f(grid[static_cast<std::ptrdiff_t>(i)]));
  return g;
}

double square(double x) { return x * x; }

// Independent N_alpha: first t >= 0 with c_bar < k_h sum_{i=0}^t alpha^i,
// i.e. the limiting slope of f_t turns negative.
StageCount slope_sign_oracle(double a_star, double alpha) {
  const double c = 1.0;
  const double k = c * (1.0 - a_star);
  if (c - k / (1.0 - alpha) >= 0.0) return std::nullopt;
  double sum = 0.0, p = 1.0;
  for (int t = 0;; ++t, p *= alpha) {
    sum += p;
    if (c - k * sum < 0.0) return t;
  }
}

ModelSpec abs_model(double c_bar, double alpha) {
  ModelSpec s;
  s.K = 2.0;
  s.c_bar = c_bar;
  s.alpha = alpha;
  s.h = HoldingCost::linear(1.0, 1.0);
  s.demand = DemandDistribution({{1.0, 0.5}, {2.0, 0.5}});
  return s;
}

// Random K-convex candidate: convex base plus a few jumps of size up to K.
GFunction random_kconvex_candidate(std::mt19937_64& rng, const Grid& grid, double K) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double c2 = 0.05 * U(rng);
  std::vector<std::pair<double, double>> kinks;
  for (int k = 0; k < 3; ++k) kinks.push_back({-10.0 + 20.0 * U(rng), 2.0 * U(rng)});
  std::vector<std::pair<double, double>> jumps;
  const int n_jumps = 1 + static_cast<int>(U(rng) * 2.0);
  for (int k = 0; k < n_jumps; ++k) jumps.push_back({-10.0 + 20.0 * U(rng), (U(rng) < 0.7 ? -1.0 : 1.0) * K * U(rng)});
  const double tilt = -3.0 + 6.0 * U(rng);
  GFunction g{grid, {}, std::nullopt};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[static_cast<std::ptrdiff_t>(i)];
    double f = c2 * x * x + tilt * x;
    for (auto [b, w] : kinks) f += w * std::abs(x - b);
    for (auto [b, j] : jumps)
      if (x >= b) f += j;
    g.values.push_back(f);
  }
  return g;
}

}  // namespace

TEST(AlphaStar, Examples) {
  EXPECT_DOUBLE_EQ(alpha_star(HoldingCost::linear(1.0, 1.0), 2.0), 0.5);
  EXPECT_DOUBLE_EQ(alpha_star(HoldingCost::linear(1.0, 3.0), 2.0), -0.5);
  EXPECT_DOUBLE_EQ(alpha_star(HoldingCost::linear(1.0, 2.0), 2.0), 0.0);
}

TEST(AlphaStar, AgreesWithDeepRatio) {
  // alpha* = 1 + lim h(x) / (c_bar x) as x -> -inf.
  const auto h1 = HoldingCost::linear(1.0, 1.0);
  EXPECT_NEAR(1.0 + h1(-1e6) / (2.0 * -1e6), 0.5, 1e-9);
  const auto h2 = HoldingCost::piecewise_linear({{-3.0, 7.0}, {-1.0, 2.0}, {2.0, 0.0}});
  EXPECT_NEAR(alpha_star(h2, 1.5), 1.0 + h2(-1e7) / (1.5 * -1e7), 1e-6);
}

TEST(AlphaStar, Tabulated) {
  const auto h = HoldingCost::tabulated({{-2.0, 6.0}, {0.0, 0.0}, {2.0, 2.0}});
  EXPECT_DOUBLE_EQ(alpha_star(h, 4.0), 0.25);
  const auto steep = HoldingCost::tabulated({{-3.0, kInf}, {-2.0, 6.0}, {0.0, 0.0}, {2.0, 2.0}});
  EXPECT_EQ(alpha_star(steep, 4.0), -kInf);
  EXPECT_THROW(alpha_star(HoldingCost::tabulated({{0.0, 1.0}}), 1.0), std::invalid_argument);
}

TEST(NAlphaFormula, Examples) {
  EXPECT_EQ(n_alpha_formula(-0.5, 0.9), 0);
  EXPECT_EQ(n_alpha_formula(0.5, 0.9), 2);
  EXPECT_EQ(n_alpha_formula(0.5, 0.4), std::nullopt);
  EXPECT_EQ(n_alpha_formula(0.5, 0.5), std::nullopt);
  EXPECT_EQ(n_alpha_formula(0.0, 0.3), 1);
  EXPECT_EQ(n_alpha_formula(0.0, 0.0), std::nullopt);
  EXPECT_EQ(n_alpha_formula(-kInf, 0.5), 0);
  EXPECT_THROW(n_alpha_formula(0.5, 1.0), DomainError);
  EXPECT_THROW(n_alpha_formula(0.5, -0.1), DomainError);
}

TEST(NAlphaFormula, MatchesSlopeSignOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> A(-1.0, 0.999), B(0.0, 0.99);
  for (int k = 0; k < 2000; ++k) {
    const double a_star = A(rng), alpha = B(rng);
    EXPECT_EQ(n_alpha_formula(a_star, alpha), slope_sign_oracle(a_star, alpha)) << a_star << " " << alpha;
  }
}

TEST(NAlphaFormula, NonincreasingInAlpha) {
  for (double a_star = -0.9; a_star < 1.0; a_star += 0.1) {
    StageCount prev;  // +inf
    for (double alpha = 0.0; alpha < 0.995; alpha += 0.005) {
      const auto n = n_alpha_formula(a_star, alpha);
      if (prev && n) EXPECT_LE(*n, *prev);
      if (prev) EXPECT_TRUE(n.has_value());
      prev = n;
    }
  }
}

TEST(NAlphaOracle, Examples) {
  EXPECT_EQ(n_alpha_oracle(abs_model(2.0, 0.9)), 2);
  EXPECT_EQ(n_alpha_oracle(abs_model(2.0, 0.4), {.t_max = 300}), std::nullopt);
  EXPECT_EQ(n_alpha_oracle(abs_model(0.5, 0.9)), 0);
}

TEST(NAlphaOracle, MatchesFormulaOnRandomPairs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> A(0.0, 0.999), B(0.0, 0.95);
  for (int k = 0; k < 100; ++k) {
    const double a_star = A(rng), alpha = B(rng);
    ModelSpec s = abs_model(1.0, alpha);
    s.h = HoldingCost::linear(0.7, 1.0 - a_star);
    s.demand = DemandDistribution({{0.0, 0.2}, {1.0, 0.5}, {3.0, 0.3}});
    EXPECT_EQ(n_alpha_oracle(s, {.t_max = 400}), n_alpha_formula(alpha_star(s.h, s.c_bar), alpha)) << a_star << " " << alpha;
  }
}

TEST(ExtractSS, Examples) {
  const Grid grid(-10.0, 10.0, 1.0);
  const auto a = extract_sS(make_g(grid, square), 4.0);
  EXPECT_EQ(a.s, -2.0);
  EXPECT_EQ(a.S, 0.0);
  EXPECT_FALSE(a.degenerate);
  EXPECT_EQ(extract_sS(make_g(grid, square), 3.9).s, -1.0);
  const auto c = extract_sS(make_g(grid, [](double) { return 3.0; }), 1.0);
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.s, -10.0);
  EXPECT_EQ(c.S, -10.0);
}

TEST(ExtractSS, BoundaryMinimumRefused) {
  const Grid grid(-10.0, 10.0, 1.0);
  EXPECT_THROW(extract_sS(make_g(grid, [](double x) { return -x; }), 1.0), ExtractionError);
  EXPECT_THROW(extract_sS(make_g(grid, [](double x) { return x; }), 1.0), ExtractionError);
}

TEST(ExtractSS, SatisfiesThresholdProperties) {
  std::mt19937_64 rng(9);
  const Grid grid(-15.0, 15.0, 0.5);
  int checked = 0;
  for (int k = 0; k < 400 && checked < 100; ++k) {
    const double K = 0.5 + 3.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const GFunction f = random_kconvex_candidate(rng, grid, K);
    if (!k_convexity_check(f, K, 1e-9).pass) continue;
    SSThresholds th;
    try {
      th = extract_sS(f, K);
    } catch (const ExtractionError&) {
      continue;
    }
    ++checked;
    const auto& v = f.values;
    const std::size_t si = *grid.index_of(th.s), Si = *grid.index_of(th.S);
    const double eps = 1e-9 * (1.0 + std::abs(v[Si]) + K);
    ASSERT_LE(th.s, th.S);
    for (std::size_t i = 0; i < si; ++i) EXPECT_LT(v[Si] + K, v[i] + eps);
    for (std::size_t i = 1; i <= si; ++i) EXPECT_LE(v[i], v[i - 1] + eps);
    for (std::size_t i = si; i < v.size(); ++i)
      for (std::size_t j = i; j < v.size(); ++j) EXPECT_LE(v[i], v[j] + K + eps);
  }
  EXPECT_GE(checked, 50);
}

TEST(KConvexity, ConvexPasses) {
  const Grid grid(-10.0, 10.0, 1.0);
  for (double K : {0.0, 1.0, 10.0}) {
    EXPECT_TRUE(k_convexity_check(make_g(grid, square), K, 0.0).pass);
    EXPECT_TRUE(k_convexity_check(make_g(grid, square), K, 0.0, KConvexityMode::Exhaustive).pass);
  }
}

TEST(KConvexity, EnvelopeOfSquarePasses) {
  const Grid grid(-10.0, 10.0, 1.0);
  const GFunction g = order_envelope(make_g(grid, square), 1.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[static_cast<std::ptrdiff_t>(i)];
    EXPECT_DOUBLE_EQ(g.values[i], x <= -1.0 ? 1.0 : x * x);
  }
  EXPECT_TRUE(k_convexity_check(g, 1.0, 1e-12).pass);  // several triples are tight
  EXPECT_FALSE(k_convexity_check(g, 0.0, 0.0).pass);
}

TEST(KConvexity, DownwardJumpFails) {
  // f = -2K 1{x >= 0}: the worst triple is (x, z, y) = (-5, -1, 0) with
  // violation (1 - theta) K = 0.8 K.
  const double K = 1.0;
  const Grid grid(-5.0, 5.0, 1.0);
  GFunction f = make_g(grid, [](double x) { return x >= 0.0 ? -2.0 : 0.0; });
  for (auto mode : {KConvexityMode::Fast, KConvexityMode::Exhaustive}) {
    const auto r = k_convexity_check(f, K, 1e-12, mode);
    EXPECT_FALSE(r.pass);
    ASSERT_TRUE(r.witness);
    EXPECT_LT((*r.witness)[1], 0.0);
    EXPECT_GE((*r.witness)[2], 0.0);
    EXPECT_NEAR(r.worst_violation, 0.8 * K, 1e-12);
  }
  // The triple (-1, 0, 1) holds: f(0) = -2K <= -0.5K.
  const double theta = 0.5;
  EXPECT_LE(f.values[5], theta * f.values[4] + (1 - theta) * f.values[6] + (1 - theta) * K);
}

TEST(KConvexity, FastMatchesExhaustive) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const Grid grid(-8.0, 8.0, 1.0);
  int fails = 0;
  for (int k = 0; k < 500; ++k) {
    const double K = 2.0 * U(rng);
    GFunction f{grid, {}, std::nullopt};
    if (k % 2 == 0) {
      f = random_kconvex_candidate(rng, grid, K);
    } else {
      for (std::size_t i = 0; i < grid.size(); ++i) f.values.push_back(10.0 * U(rng));
    }
    const double tol = k % 3 == 0 ? 0.0 : 0.1 * U(rng);
    const auto fast = k_convexity_check(f, K, tol, KConvexityMode::Fast);
    const auto full = k_convexity_check(f, K, tol, KConvexityMode::Exhaustive);
    ASSERT_EQ(fast.pass, full.pass) << k;
    if (!full.pass) {
      ++fails;
      EXPECT_DOUBLE_EQ(fast.worst_violation, full.worst_violation);
    } else {
      EXPECT_LE(fast.worst_violation, full.worst_violation + 1e-12);
    }
  }
  EXPECT_GT(fails, 100);
}

TEST(OrderEnvelope, NondecreasingIsUnchanged) {
  const Grid grid(-10.0, 10.0, 1.0);
  const GFunction f = make_g(grid, [](double x) { return std::exp(0.2 * x); });
  EXPECT_EQ(order_envelope(f, 0.5).values, f.values);
}

TEST(OrderEnvelope, CappedAtTop) {
  const Grid grid(-10.0, 10.0, 1.0);
  const GFunction f = make_g(grid, [](double x) { return -x; });
  const GFunction g = order_envelope(f, 1.0, 10.0);
  EXPECT_EQ(g.values.back(), f.values.back());
  EXPECT_EQ(g.values.front(), 1.0 - 10.0);
  EXPECT_THROW(order_envelope(f, 1.0, 5.0), std::invalid_argument);
}

TEST(OrderEnvelope, MatchesBruteForce) {
  std::mt19937_64 rng(77);
  const Grid grid(-10.0, 10.0, 0.5);
  for (int k = 0; k < 50; ++k) {
    const GFunction f = random_kconvex_candidate(rng, grid, 1.5);
    const GFunction g = order_envelope(f, 1.5);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double best = f.values[i];
      for (std::size_t j = i + 1; j < grid.size(); ++j) best = std::min(best, 1.5 + f.values[j]);
      EXPECT_DOUBLE_EQ(g.values[i], best);
    }
  }
}

TEST(OrderEnvelope, PreservesKConvexity) {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const Grid grid(-12.0, 12.0, 0.5);
  int tested = 0;
  while (tested < 200) {
    const double K = 0.2 + 3.0 * U(rng);
    const GFunction f = random_kconvex_candidate(rng, grid, K);
    if (!k_convexity_check(f, K, 1e-9).pass) continue;
    ++tested;
    EXPECT_TRUE(k_convexity_check(order_envelope(f, K), K, 1e-9).pass);
    // Capped variant: restrict to [x_min, x_bar] and cap at the new top.
    const double x_bar = std::floor(-4.0 + 16.0 * U(rng));
    const Grid sub(grid.x_min(), x_bar, grid.step());
    GFunction fs{sub, std::vector<double>(f.values.begin(), f.values.begin() + static_cast<std::ptrdiff_t>(sub.size())),
                 std::nullopt};
    EXPECT_TRUE(k_convexity_check(order_envelope(fs, K, x_bar), K, 1e-9).pass);
  }
}

TEST(StructuredPolicy, ActionsAndTables) {
  const auto p = StructuredPolicy::stationary(-2.0, 3.0);
  EXPECT_EQ(p.order(-5.0), 8.0);
  EXPECT_EQ(p.order(-2.0), 0.0);
  EXPECT_EQ(p.order(1.0), 0.0);
  const Grid grid(-5.0, 5.0, 1.0);
  const PolicyTable t = to_table(p, grid);
  EXPECT_EQ(t.order(0), 8.0);
  const auto tf = threshold_form(t, 0, grid.size() - 1);
  EXPECT_TRUE(tf.threshold);
  EXPECT_EQ(tf.s, -2.0);
  EXPECT_EQ(tf.S, 3.0);
  EXPECT_THROW(StructuredPolicy::stationary(3.0, 2.0), std::invalid_argument);

  const auto a = StructuredPolicy::abridged({{0.0, 2.0}, {1.0, 3.0}}, 1, 3);
  EXPECT_EQ(a.order(-1.0, 0), 3.0);
  EXPECT_EQ(a.order(0.5, 1), 2.5);
  EXPECT_EQ(a.order(-10.0, 2), 0.0);
  EXPECT_THROW(a.order(0.0, 3), std::out_of_range);
}

TEST(StructuredPolicy, ThresholdFormRejectsMixedTargets) {
  const Grid grid(0.0, 5.0, 1.0);
  EXPECT_FALSE(threshold_form(PolicyTable(grid, {3, 1, 0, 0, 0, 0}), 0, 5).threshold);
  EXPECT_FALSE(threshold_form(PolicyTable(grid, {3, 2, 0, 1, 0, 0}), 0, 5).threshold);
  const auto none = threshold_form(PolicyTable::never_order(grid), 0, 5);
  EXPECT_TRUE(none.threshold);
  EXPECT_FALSE(none.orders);
}

TEST(BuildStructuredPolicy, FiniteHorizonCases) {
  const Grid grid(-60.0, 40.0, 1.0);
  // alpha* = 0.5, alpha = 0.9: N_alpha = 2.
  const ModelSpec s = abs_model(2.0, 0.9);
  const GridModel model(s, grid);
  EXPECT_EQ(build_structured_policy(s, solve_finite_horizon(model, 2)).kind, StructuredPolicy::Kind::NeverOrder);
  const auto p5 = build_structured_policy(s, solve_finite_horizon(model, 5));
  ASSERT_EQ(p5.kind, StructuredPolicy::Kind::SStN);
  EXPECT_EQ(p5.tail, 2);
  EXPECT_EQ(p5.thresholds.size(), 3u);
  for (const auto& t : p5.thresholds) EXPECT_LE(t.s, t.S);

  // alpha* < 0: thresholds from the first stage on.
  const ModelSpec neg = abs_model(0.5, 0.9);
  const auto pn = build_structured_policy(neg, solve_finite_horizon(GridModel(neg, grid), 4));
  ASSERT_EQ(pn.kind, StructuredPolicy::Kind::SStN);
  EXPECT_EQ(pn.tail, 0);
  EXPECT_EQ(pn.thresholds.size(), 4u);

  // alpha <= alpha*.
  const ModelSpec never = abs_model(2.0, 0.4);
  EXPECT_EQ(build_structured_policy(never, solve_finite_horizon(GridModel(never, grid), 6)).kind,
            StructuredPolicy::Kind::NeverOrder);
}

TEST(BuildStructuredPolicy, UnsupportedRegimes) {
  const Grid grid(0.0, 40.0, 1.0);
  ModelSpec s = abs_model(2.0, 0.9);
  s.shortfall = Shortfall::LostSales;
  const auto sol = solve_finite_horizon(GridModel(s, grid), 3);
  EXPECT_THROW(build_structured_policy(s, sol), UnsupportedError);
  s.shortfall = Shortfall::Backorders;
  s.regime = ConstraintRegime::bounded_orders(3.0);
  EXPECT_THROW(build_structured_policy(s, solve_finite_horizon(GridModel(s, Grid(-20.0, 20.0, 1.0)), 3)),
               UnsupportedError);
}

TEST(BuildStructuredPolicy, InfiniteHorizonMatchesGreedy) {
  const Grid grid(-60.0, 40.0, 1.0);
  const ModelSpec s = abs_model(2.0, 0.9);
  const GridModel model(s, grid);
  const auto res = solve_infinite_horizon(model);
  ASSERT_TRUE(res.converged());
  const auto p = build_structured_policy(s, res);
  ASSERT_EQ(p.kind, StructuredPolicy::Kind::SS);
  const auto tf = threshold_form(res.policy, 0, grid.size() - 1);
  EXPECT_TRUE(tf.threshold);
  EXPECT_EQ(tf.s, p.ss.s);
  EXPECT_EQ(tf.S, p.ss.S);
}

TEST(KConvexity, SolverGFunctionsAfterTail) {
  std::mt19937_64 rng(55);
  for (auto kind : {ConstraintRegime::Kind::U, ConstraintRegime::Kind::BS}) {
    for (int k = 0; k < 3; ++k) {
      auto inst = oracle::random_instance(rng, kind, Shortfall::Backorders, 60, 40);
      const GridModel model(inst.spec, inst.grid);
      const double a_star = alpha_star(inst.spec.h, inst.spec.c_bar);
      const auto n = n_alpha_formula(a_star, inst.spec.alpha);
      if (!n) continue;
      const auto sol = solve_finite_horizon(model, *n + 8);
      for (int t = *n; t < *n + 8; ++t) {
        const auto& g = sol.g[static_cast<std::size_t>(t)];
        double mag = 1.0;
        for (double v : g.values) mag = std::max(mag, std::abs(v));
        EXPECT_TRUE(k_convexity_check(g, inst.spec.K, 1e-7 * mag).pass) << to_string(kind) << " t=" << t;
      }
    }
  }
}

TEST(ClassifyRegime, Examples) {
  EXPECT_EQ(classify_regime(-1.0, 0.3, 10).str(), "R_0");
  EXPECT_EQ(classify_regime(0.6, 0.5, 10).str(), "R_inf");
  EXPECT_EQ(classify_regime(0.6, 0.5, std::nullopt).str(), "R_inf");
  EXPECT_EQ(classify_regime(0.5, 0.9, 10).str(), "R_2");
  EXPECT_EQ(classify_regime(0.5, 0.9, std::nullopt).str(), "R_0");
  EXPECT_THROW(classify_regime(0.5, 1.0, 3), DomainError);
}

TEST(Sandwich, Examples) {
  std::mt19937_64 rng(4);
  const auto inst = oracle::random_instance(rng, ConstraintRegime::Kind::U, Shortfall::Backorders);
  const auto v = solve_infinite_horizon(GridModel(inst.spec, inst.grid));
  const auto v0 = solve_no_setup(inst.spec, inst.grid);
  EXPECT_TRUE(sandwich_check(v.value, v0.value, inst.spec, std::nullopt, 2e-6).pass);

  const double shift = 2.0 * inst.spec.K / (1.0 - inst.spec.alpha);
  std::vector<double> up = v0.value.values();
  for (double& x : up) x += shift;
  const auto bad = sandwich_check(ValueFunction(inst.grid, up, std::nullopt), v0.value, inst.spec, std::nullopt, 2e-6);
  EXPECT_FALSE(bad.pass);
  EXPECT_LT(bad.upper_margin, 0.0);

  ModelSpec tiny = inst.spec;
  tiny.K = 1e-9;
  const auto vt = solve_infinite_horizon(GridModel(tiny, inst.grid));
  const auto r = sandwich_check(vt.value, v0.value, tiny, std::nullopt, 2e-6);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.lower_margin, 2e-6);
}
