#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pnp/config.hpp"

namespace pnp {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitConfig = 2, kExitBlowup = 3 };

/// Writes `content` to `path` through a sibling temporary file and a rename.
void write_atomic(const std::string& path, const std::string& content);

/// %.17g, the format of every number in CSV output.
std::string fmt17(double v);

struct RunSummary {
  bool blew_up = false;
  int steps = 0;
  int blowup_step = -1;
  std::vector<std::string> files;  // written artifacts, relative to output_dir
};

/// Single simulation: series.csv, fields_<step>.csv, report.json and, when
/// profile_x is set, profile.csv from the last field state.
RunSummary run_simulation(const RunConfig& config, std::optional<double> profile_x = std::nullopt);

struct ConvergeOptions {
  std::vector<double> epsilons;  // empty: the config's ε only
  int levels = 4;
  double dt0_over_h = 1.0;
};

/// Writes convergence.json and convergence.csv; returns the reports.
std::vector<ConvergenceReport> run_converge(const RunConfig& config, const ConvergeOptions& options);

struct ScanOptions {
  std::vector<std::string> schemes{"I2", "split"};
  std::vector<std::string> formulations{"primitive", "quasi_neutral"};
  std::vector<double> epsilons{1e-4, 1e-6, 1e-8, 1e-9, 1e-10, 1e-11};
  int threads = 0;  // 0: default_threads()
};

/// Writes scan.json and scan.csv.
StabilityMatrix run_scan(const RunConfig& config, const ScanOptions& options);

struct TimingOptions {
  std::vector<double> epsilons{1e-4, 1e-9};
  int iterations = 20;
};

/// Writes timing.json and timing.csv (epsilon,t_primitive,t_cq).
TimingReport run_timing(const RunConfig& config, const TimingOptions& options);

/// CSV text of a timing table, header included.
std::string timing_csv(const TimingReport& report);

}  // namespace pnp
