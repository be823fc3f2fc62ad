#include "stockdp/commands.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>

#include "stockdp/config.hpp"
#include "stockdp/io.hpp"
#include "stockdp/simulator.hpp"
#include "stockdp/solver.hpp"
#include "stockdp/structure.hpp"

namespace stockdp {

namespace fs = std::filesystem;

namespace {

struct Run {
  RunConfig cfg;
  std::uint64_t hash = 0;
  Format format = Format::Csv;
  Grid grid{0.0, 1.0, 1.0};

  std::string write(const std::string& name, const Table& t) const {
    return write_table(cfg.output.dir, name, t, hash, format);
  }
};

Run load_run(const CommandOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("--config is required");
  Run r;
  r.cfg = load_config(opts.config_path);
  if (opts.out_dir) r.cfg.output.dir = *opts.out_dir;
  if (opts.seed) r.cfg.sim.seed = *opts.seed;
  if (opts.format) {
    if (*opts.format != "csv" && *opts.format != "jsonl")
      throw ConfigError("--format: expected csv or jsonl, got \"" + *opts.format + "\"");
    r.cfg.output.format = *opts.format;
  }
  r.hash = config_hash(r.cfg);
  r.format = parse_format(r.cfg.output.format);
  r.grid = r.cfg.make_grid();
  write_file_atomic((fs::path(r.cfg.output.dir) / "config.json").string(), dump_config(r.cfg));
  return r;
}

Table value_table(const ValueFunction& v) {
  Table t{{"x", "value"}, {}};
  for (std::size_t i = 0; i < v.values().size(); ++i) t.add({v.grid()[static_cast<std::ptrdiff_t>(i)], v[i]});
  return t;
}

Table g_table(const GFunction& g) {
  Table t{{"x", "G"}, {}};
  for (std::size_t i = 0; i < g.values.size(); ++i) t.add({g.grid[static_cast<std::ptrdiff_t>(i)], g.values[i]});
  return t;
}

Table policy_table(const PolicyTable& p) {
  Table t{{"x", "order"}, {}};
  for (std::size_t i = 0; i < p.size(); ++i) t.add({p.grid()[static_cast<std::ptrdiff_t>(i)], p.order(i)});
  return t;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArtifactError& e) {
    err << "artifact error: " << e.what() << "\n";
    return kExitArtifact;
  } catch (const OracleError& e) {
    err << "oracle disagreement: " << e.what() << "\n";
    return kExitOracle;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int verdict_exit(Verdict v) {
  switch (v) {
    case Verdict::Converging:
      return kExitOk;
    case Verdict::Diverging:
      return kExitDivergence;
    case Verdict::Undetermined:
      return kExitFailure;
  }
  return kExitFailure;
}

std::string stage_label(const std::optional<int>& stage) { return stage ? std::to_string(*stage) : "inf"; }

void require_infinite(const Run& run, const char* command) {
  if (run.cfg.solver.horizon)
    throw ConfigError(std::string(command) + " evaluates stationary policies; set solver.horizon to \"inf\"");
}

// Policies named on the command line, or the solve output in the run directory.
std::vector<std::string> policy_paths(const CommandOptions& opts, const Run& run) {
  if (!opts.policies.empty()) return opts.policies;
  return {(fs::path(run.cfg.output.dir) / ("policy." + extension(run.format))).string()};
}

}  // namespace

int cmd_solve(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Run run = load_run(opts);
    const GridModel model(run.cfg.model, run.grid);
    if (run.cfg.solver.horizon) {
      const int N = *run.cfg.solver.horizon;
      const FiniteHorizonSolution sol = solve_finite_horizon(model, N);
      for (int k = 0; k <= N; ++k)
        run.write("value_stage_" + std::to_string(k), value_table(sol.values[static_cast<std::size_t>(k)]));
      for (int t = 0; t < N; ++t)
        run.write("policy_stage_" + std::to_string(t), policy_table(sol.policies[static_cast<std::size_t>(t)]));
      out << "finite horizon N=" << N << ": wrote " << N + 1 << " value tables and " << N << " policy tables to "
          << run.cfg.output.dir << " (config_hash=" << hex64(run.hash) << ")\n";
      return int{kExitOk};
    }

    const SolverOptions so = run.cfg.solver_options();
    const InfiniteHorizonResult res = solve_infinite_horizon(model, so);
    Table trace{{"iteration", "residual", "sup_norm"}, {}};
    for (std::size_t k = 0; k < res.residuals.size(); ++k)
      trace.add({static_cast<std::int64_t>(k + 1), res.residuals[k],
                 k + 1 < res.sup_norms.size() ? res.sup_norms[k + 1] : kInf});
    run.write("trace", trace);
    const double ceiling = so.v_max.value_or(default_ceiling(model));
    Table verdict{{"verdict", "iterations", "final_residual", "ceiling", "stopping_threshold"}, {}};
    verdict.add({to_string(res.verdict), static_cast<std::int64_t>(res.iterations),
                 res.residuals.empty() ? 0.0 : res.residuals.back(), ceiling,
                 stopping_threshold(so.tol, run.cfg.model.alpha)});
    run.write("verdict", verdict);
    if (res.converged()) {
      run.write("value", value_table(res.value));
      run.write("policy", policy_table(res.policy));
      run.write("g", g_table(res.g));
    }
    out << "verdict " << to_string(res.verdict) << " after " << res.iterations << " iterations; outputs in "
        << run.cfg.output.dir << " (config_hash=" << hex64(run.hash) << ")\n";
    return verdict_exit(res.verdict);
  });
}

int cmd_structure(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Run run = load_run(opts);
    const ModelSpec& spec = run.cfg.model;
    const double a_star = alpha_star(spec.h, spec.c_bar);
    const double k_h = spec.h.left_slope_magnitude();
    const StageCount formula = n_alpha_formula(a_star, spec.alpha);
    StageCount oracle;
    std::string oracle_note;
    bool agree = false;
    try {
      oracle = n_alpha_oracle(spec);
      if (opts.inject_oracle_fault) oracle = oracle ? std::optional<int>(*oracle + 1) : std::optional<int>(0);
      agree = oracle == formula;
    } catch (const OracleError& e) {
      oracle_note = e.what();
    }
    const RegimeLabel label = classify_regime(a_star, spec.alpha, run.cfg.solver.horizon);

    const GridModel model(spec, run.grid);
    std::vector<GFunction> gs;  // functions whose K-convexity is reported
    std::optional<StructuredPolicy> policy;
    std::string policy_note;
    int code = kExitOk;
    const auto build = [&](const auto& sol) {
      try {
        policy = build_structured_policy(spec, sol);
      } catch (const UnsupportedError& e) {
        policy_note = std::string("unsupported: ") + e.what();
      } catch (const ExtractionError& e) {
        policy_note = std::string("extraction failed: ") + e.what();
      }
    };
    if (run.cfg.solver.horizon) {
      const FiniteHorizonSolution sol = solve_finite_horizon(model, *run.cfg.solver.horizon);
      gs = sol.g;
      build(sol);
    } else {
      const InfiniteHorizonResult res = solve_infinite_horizon(model, run.cfg.solver_options());
      if (res.converged()) {
        gs.push_back(res.g);
        build(res);
      } else {
        policy_note = "solve verdict " + to_string(res.verdict);
        code = verdict_exit(res.verdict);
      }
    }

    Table report{{"key", "value"}, {}};
    report.add({std::string("alpha_star"), a_star});
    report.add({std::string("k_h"), k_h});
    report.add({std::string("n_alpha_formula"), to_string(formula)});
    report.add({std::string("n_alpha_oracle"), oracle_note.empty() ? to_string(oracle) : std::string("error")});
    report.add({std::string("oracle_agreement"), std::string(agree ? "true" : "false")});
    report.add({std::string("regime"), to_string(spec.regime.kind)});
    report.add({std::string("shortfall"), to_string(spec.shortfall)});
    report.add({std::string("horizon"), stage_label(run.cfg.solver.horizon)});
    report.add({std::string("regime_label"), label.str()});
    report.add({std::string("policy"), policy ? policy->describe() : std::string("none")});
    report.add({std::string("note"), policy_note.empty() ? oracle_note : policy_note});
    run.write("structure", report);

    Table th{{"stage", "s", "S"}, {}};
    if (policy && policy->kind == StructuredPolicy::Kind::SS) th.add({std::string("inf"), policy->ss.s, policy->ss.S});
    if (policy && policy->kind == StructuredPolicy::Kind::SStN)
      for (std::size_t t = 0; t < policy->thresholds.size(); ++t)
        th.add({std::to_string(t), policy->thresholds[t].s, policy->thresholds[t].S});
    run.write("thresholds", th);

    Table kc{{"g_stage", "pass", "worst_violation", "x", "z", "y"}, {}};
    const double scale = 1e-7;
    for (const auto& g : gs) {
      double mag = 1.0;
      for (double v : g.values)
        if (std::isfinite(v)) mag = std::max(mag, std::abs(v));
      const KConvexityResult r = k_convexity_check(g, spec.K, scale * mag);
      const auto w = r.witness.value_or(std::array<double, 3>{0.0, 0.0, 0.0});
      kc.add({stage_label(g.stage), std::string(r.pass ? "true" : "false"), r.worst_violation, w[0], w[1], w[2]});
    }
    run.write("kconvexity", kc);

    out << "alpha*=" << format_double(a_star) << " N_alpha=" << to_string(formula) << " ("
        << (agree ? "oracle agrees" : "oracle DISAGREES") << ") label=" << label.str()
        << " policy=" << (policy ? policy->describe() : "none") << "\n";
    if (!agree) return int{kExitOracle};
    return code;
  });
}

int cmd_classify_sweep(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const int n = opts.sweep_resolution;
    if (n < 2) throw ConfigError("--resolution must be >= 2");
    std::optional<int> horizon;
    if (opts.sweep_horizon != "inf") {
      try {
        std::size_t used = 0;
        horizon = std::stoi(opts.sweep_horizon, &used);
        if (used != opts.sweep_horizon.size() || *horizon < 0) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("--horizon: expected \"inf\" or a nonnegative stage count");
      }
    }
    std::string dir = "out";
    Format format = Format::Csv;
    std::uint64_t hash = fnv1a64("classify-sweep resolution=" + std::to_string(n) + " horizon=" + opts.sweep_horizon);
    if (!opts.config_path.empty()) {
      const Run run = load_run(opts);
      dir = run.cfg.output.dir;
      format = run.format;
      hash = fnv1a64(hex64(run.hash) + " resolution=" + std::to_string(n) + " horizon=" + opts.sweep_horizon);
    } else {
      if (opts.out_dir) dir = *opts.out_dir;
      if (opts.format) format = parse_format(*opts.format);
    }
    Table map{{"alpha_star", "alpha", "horizon", "label", "n"}, {}};
    for (int i = 0; i < n; ++i) {
      const double a_star = static_cast<double>(2 * i - n) / n;
      for (int j = 0; j < n; ++j) {
        const double alpha = static_cast<double>(j) / n;
        const RegimeLabel l = classify_regime(a_star, alpha, horizon);
        map.add({a_star, alpha, opts.sweep_horizon, l.str(), static_cast<std::int64_t>(l.n)});
      }
    }
    const std::string path = write_table(dir, "regime_map", map, hash, format);
    out << "wrote " << n * n << " points to " << path << "\n";
    return int{kExitOk};
  });
}

int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Run run = load_run(opts);
    require_infinite(run, "simulate");
    const GridModel model(run.cfg.model, run.grid);
    const SimConfig sc = run.cfg.sim.sim_config();
    Table t{{"policy", "x0", "mean", "stderr", "n_paths", "horizon", "truncation_bias_bound", "dp_value",
             "abs_diff", "within_bound"},
            {}};
    bool all_within = true;
    for (const auto& path : policy_paths(opts, run)) {
      const PolicyTable table = read_policy_table(path, run.grid);
      const PolicyEvaluation dp = evaluate_policy_dp(table, model, run.cfg.solver_options());
      for (double x0 : run.cfg.sim.start_states) {
        const SimResult r = evaluate_policy_mc(x0, table, run.cfg.model, sc, run.grid);
        const double dpv = dp.verdict == Verdict::Converging ? dp.value[static_cast<std::size_t>(*run.grid.index_of(x0))]
                                                             : std::nan("");
        const double diff = std::abs(r.mean - dpv);
        const bool within = diff <= 4.0 * r.std_error + r.truncation_bias_bound;
        all_within = all_within && within;
        t.add({fs::path(path).filename().string(), x0, r.mean, r.std_error, r.n_paths,
               static_cast<std::int64_t>(r.horizon), r.truncation_bias_bound, dpv, diff,
               std::string(within ? "true" : "false")});
      }
    }
    const std::string path = run.write("simulate", t);
    out << "wrote " << t.rows.size() << " rows to " << path << (all_within ? "" : " (some rows outside 4 stderr + bias)")
        << "\n";
    return int{kExitOk};
  });
}

int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Run run = load_run(opts);
    require_infinite(run, "compare");
    const ModelSpec& spec = run.cfg.model;
    const GridModel model(spec, run.grid);
    std::vector<Policy> policies;
    std::vector<std::string> names;
    policies.emplace_back(PolicyTable::never_order(run.grid));
    names.emplace_back("never-order");
    const InfiniteHorizonResult res = solve_infinite_horizon(model, run.cfg.solver_options());
    if (!res.converged()) {
      err << "solve verdict " << to_string(res.verdict) << "; nothing to compare\n";
      return verdict_exit(res.verdict);
    }
    policies.emplace_back(res.policy);
    names.emplace_back("optimal");
    try {
      const StructuredPolicy sp = build_structured_policy(spec, res);
      if (sp.kind == StructuredPolicy::Kind::SS) {
        policies.emplace_back(sp);
        names.emplace_back(sp.describe());
      }
    } catch (const UnsupportedError&) {
    } catch (const ExtractionError& e) {
      err << "note: " << e.what() << "\n";
    }
    for (const auto& path : opts.policies) {
      policies.emplace_back(read_policy_table(path, run.grid));
      names.emplace_back(fs::path(path).filename().string());
    }

    Table rank{{"x0", "rank", "policy", "mean", "stderr", "horizon", "truncation_bias_bound"}, {}};
    Table pairs{{"x0", "first", "second", "mean_diff", "stderr", "ci_low", "ci_high"}, {}};
    for (double x0 : run.cfg.sim.start_states) {
      const Comparison c = compare_policies(x0, policies, spec, run.cfg.sim.sim_config(), run.grid);
      for (std::size_t k = 0; k < c.ranking.size(); ++k) {
        const SimResult& r = c.results[c.ranking[k]];
        rank.add({x0, static_cast<std::int64_t>(k + 1), names[c.ranking[k]], r.mean, r.std_error,
                  static_cast<std::int64_t>(r.horizon), r.truncation_bias_bound});
      }
      for (const auto& p : c.pairs)
        pairs.add({x0, names[p.first], names[p.second], p.mean, p.std_error, p.ci_low, p.ci_high});
    }
    run.write("ranking", rank);
    const std::string path = run.write("compare", pairs);
    out << "compared " << policies.size() << " policies at " << run.cfg.sim.start_states.size()
        << " start states; wrote " << path << "\n";
    return int{kExitOk};
  });
}

}  // namespace stockdp
