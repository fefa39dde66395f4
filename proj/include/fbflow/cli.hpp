#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "fbflow/config.hpp"

namespace fbflow {

struct RunOptions {
  std::string subcommand;  // solve-linear | solve-nonlinear | dual | profiles | decompose | verify
  std::string config_path;
  std::optional<std::string> out;
  bool reference_mode = false;
  int threads = 1;
};

/// Reads FBFLOW_THREADS (default 1); a malformed value is a config error.
int threads_from_env();

/// Runs one subcommand and writes its artifacts. Returns 0, 1 (config error) or 2 (numerical failure).
int run(const RunOptions& opt, std::ostream& log);

/// Same with an already parsed configuration; throws Error instead of mapping to exit codes.
nlohmann::json run_config(const std::string& subcommand, const RunConfig& cfg, const std::string& out_dir,
                          bool reference_mode, int threads, std::ostream& log);

}  // namespace fbflow
