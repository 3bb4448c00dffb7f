#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pnp/app.hpp"
#include "pnp/errors.hpp"

namespace {

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const std::string& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw pnp::ConfigError("--set: expected key=value, got '" + item + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson-Nernst-Planck solver on a perforated unit square"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<double> profile_x;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override a configuration key (key=value, repeatable)")->take_all();
  app.add_option("--profile-x", profile_x, "Also write profile.csv along the grid line nearest this x (run only)");

  auto* run = app.add_subcommand("run", "Single simulation");

  pnp::ConvergeOptions conv;
  auto* converge = app.add_subcommand("converge", "Richardson order estimate over halving time steps");
  converge->add_option("--epsilons", conv.epsilons, "Debye lengths to study (default: the configured one)");
  converge->add_option("--levels", conv.levels, "Number of dt levels")->check(CLI::Range(3, 12));
  converge->add_option("--dt0", conv.dt0_over_h, "Coarsest dt in units of h");

  pnp::ScanOptions scan_opts;
  auto* scan = app.add_subcommand("scan", "Stability matrix over schemes, formulations and epsilon");
  scan->add_option("--schemes", scan_opts.schemes, "Schemes (I1..I6, split)");
  scan->add_option("--formulations", scan_opts.formulations, "primitive and/or quasi_neutral");
  scan->add_option("--epsilons", scan_opts.epsilons, "Debye lengths");
  scan->add_option("--threads", scan_opts.threads, "Worker threads (0: automatic)")->check(CLI::NonNegativeNumber);

  pnp::TimingOptions timing_opts;
  auto* timing = app.add_subcommand("timing", "Per-step cost of both formulations");
  timing->add_option("--epsilons", timing_opts.epsilons, "Debye lengths");
  timing->add_option("--iterations", timing_opts.iterations, "Timed steps per cell")->check(CLI::NonNegativeNumber);

  for (auto* sub : {run, converge, scan, timing}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? pnp::kExitOk : pnp::kExitConfig;
  }

  try {
    const pnp::RunConfig config = pnp::load_config(config_path, parse_overrides(sets));
    if (profile_x && !run->parsed()) throw pnp::ConfigError("--profile-x: only valid with the run subcommand");

    if (run->parsed()) {
      const pnp::RunSummary s = pnp::run_simulation(config, profile_x);
      if (s.blew_up) {
        std::cerr << "blow-up at step " << s.blowup_step << "; partial output in " << config.output_dir << "\n";
        return pnp::kExitBlowup;
      }
      std::cout << "completed " << s.steps << " steps; output in " << config.output_dir << "\n";
    } else if (converge->parsed()) {
      for (const auto& r : pnp::run_converge(config, conv)) {
        const auto o = r.finest_order();
        std::cout << r.scheme << " " << pnp::formulation_name(r.formulation) << " eps=" << r.epsilon << ": "
                  << r.verdict;
        if (o) std::cout << ", order " << *o;
        std::cout << "\n";
      }
    } else if (scan->parsed()) {
      const pnp::StabilityMatrix m = pnp::run_scan(config, scan_opts);
      int unstable = 0;
      for (const auto& c : m.cells) unstable += c.applicable && !c.stable;
      std::cout << m.cells.size() << " cells, " << unstable << " unstable\n";
      for (const auto& note : m.monotonicity_violations) std::cout << "note: " << note << "\n";
    } else if (timing->parsed()) {
      std::cout << pnp::timing_csv(pnp::run_timing(config, timing_opts));
    }
  } catch (const pnp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return pnp::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pnp::kExitInternal;
  }
  return pnp::kExitOk;
}
