#pragma once

// Subcommands of the stockdp tool. Each returns a process exit code.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stockdp {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,        ///< unexpected error, or iteration limit reached
  kExitConfig = 2,
  kExitDivergence = 3,
  kExitOracle = 4,
  kExitArtifact = 5,       ///< policy artifact missing or corrupted
};

struct CommandOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
  std::vector<std::string> policies;  ///< policy artifacts for simulate/compare
  bool inject_oracle_fault = false;
  int sweep_resolution = 100;
  std::string sweep_horizon = "inf";  ///< "inf" or a stage count
};

int cmd_solve(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_structure(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_classify_sweep(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace stockdp
