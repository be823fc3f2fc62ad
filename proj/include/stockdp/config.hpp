#pragma once

// Run configuration: a JSON document holding the model, grid, solver,
// simulation and output settings. See README.md for the schema.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stockdp/grid.hpp"
#include "stockdp/model.hpp"
#include "stockdp/simulator.hpp"
#include "stockdp/solver.hpp"

namespace stockdp {

/// Invalid configuration. what() is "<source>:<line>:<col>: <message>" when
/// the offending text could be located.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct GridConfig {
  double x_min = -20.0;
  double x_max = 40.0;
  double step = 1.0;
  bool operator==(const GridConfig&) const = default;
};

struct SolverConfig {
  double tol = 1e-6;
  std::optional<double> v_max;  ///< nullopt: default ceiling
  int max_iterations = 200000;
  std::optional<int> horizon;   ///< nullopt: infinite horizon
  bool operator==(const SolverConfig&) const = default;
};

struct SimSettings {
  std::uint64_t seed = 1;
  std::int64_t n_paths = 10000;
  int horizon_cap = 0;
  double discount_tail_epsilon = 1e-8;
  std::vector<double> start_states{0.0};
  bool operator==(const SimSettings&) const = default;
  SimConfig sim_config() const { return {seed, n_paths, horizon_cap, discount_tail_epsilon}; }
};

struct OutputConfig {
  std::string dir = "out";
  std::string format = "csv";  ///< csv | jsonl
  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  ModelSpec model;
  GridConfig grid;
  SolverConfig solver;
  SimSettings sim;
  OutputConfig output;
  bool operator==(const RunConfig&) const = default;

  Grid make_grid() const { return Grid(grid.x_min, grid.x_max, grid.step); }
  SolverOptions solver_options() const;
};

/// Parses and validates. `source` names the text in error messages.
RunConfig parse_config(std::string_view text, const std::string& source = "config");
RunConfig load_config(const std::string& path);

/// Canonical text: sorted keys, two-space indent, shortest round-trip numbers.
std::string dump_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
/// "0x" followed by 16 lowercase hex digits.
std::string hex64(std::uint64_t v);
/// fnv1a64 of dump_config(cfg).
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace stockdp
