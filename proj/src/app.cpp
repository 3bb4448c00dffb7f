#include "pnp/app.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pnp/errors.hpp"

namespace pnp {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json config_json(const RunConfig& c) { return json::parse(config_to_json(c)); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string opt17(const std::optional<double>& v) { return v ? fmt17(*v) : ""; }

const char* tag_name(NodeTag t) {
  switch (t) {
    case NodeTag::Internal:
      return "internal";
    case NodeTag::Ghost:
      return "ghost";
    case NodeTag::Inactive:
      break;
  }
  return "inactive";
}

std::string field_row(const LevelSetGrid& grid, const FemOperators& ops, int dof, const Vector& cp,
                      const Vector& cm, const Vector& phi) {
  const int node = grid.classification.active_nodes[dof];
  const Point p = ops.dof_points[dof];
  return fmt17(p.x) + "," + fmt17(p.y) + "," + tag_name(grid.classification.tags[node]) + "," + fmt17(cp[dof]) +
         "," + fmt17(cm[dof]) + "," + fmt17(phi[dof]) + "\n";
}

constexpr const char* kFieldHeader = "x,y,class,c_plus,c_minus,phi\n";

std::pair<Vector, Vector> species(const StateVector& s, const PhysicalParams& p) {
  const SpeciesDensities d = densities(s, p);
  return {p.m_plus * d.plus, p.m_minus * d.minus};
}

std::string fields_csv(const LevelSetGrid& grid, const FemOperators& ops, const StateVector& s,
                       const PhysicalParams& p) {
  const auto [cp, cm] = species(s, p);
  std::string out = kFieldHeader;
  for (int i = 0; i < ops.n_active(); ++i) out += field_row(grid, ops, i, cp, cm, s.blocks[2]);
  return out;
}

std::string profile_csv(const LevelSetGrid& grid, const FemOperators& ops, const StateVector& s,
                        const PhysicalParams& p, double x) {
  const GridSpec& g = grid.spec;
  const int col = static_cast<int>(std::lround((x - g.origin.x) / g.h()));
  if (col < 0 || col > g.n_cells) throw ConfigError("profile-x: outside the domain");
  const auto [cp, cm] = species(s, p);
  std::string out = kFieldHeader;
  // Active dofs follow node order, so y increases down the column.
  for (int i = 0; i < ops.n_active(); ++i) {
    if (grid.classification.active_nodes[i] % g.nodes_per_side() == col) {
      out += field_row(grid, ops, i, cp, cm, s.blocks[2]);
    }
  }
  return out;
}

std::string series_row(const StepRecord& r) {
  const Diagnostics& d = r.diag;
  return std::to_string(r.step) + "," + fmt17(r.t) + "," + fmt17(d.mass_plus) + "," + fmt17(d.mass_minus) + "," +
         fmt17(d.qn_deficit) + "," + fmt17(d.min_c_plus) + "," + fmt17(d.min_c_minus) + "," + fmt17(d.max_c_plus) +
         "," + fmt17(d.max_c_minus) + "," + fmt17(r.peclet.margin) + "\n";
}

json diagnostics_json(const Diagnostics& d) {
  return {{"mass_plus", d.mass_plus},   {"mass_minus", d.mass_minus},   {"qn_deficit", d.qn_deficit},
          {"min_c_plus", d.min_c_plus}, {"max_c_plus", d.max_c_plus},   {"min_c_minus", d.min_c_minus},
          {"max_c_minus", d.max_c_minus}};
}

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.output_dir) / name).string(); }

}  // namespace

RunSummary run_simulation(const RunConfig& config, std::optional<double> profile_x) {
  validate(config);
  if (profile_x && !(*profile_x >= 0.0 && *profile_x <= 1.0)) throw ConfigError("profile-x: outside the unit square");
  const auto setup_start = Clock::now();
  const Problem problem = config.problem();
  const LevelSetGrid grid = problem.build_grid();
  const auto ops = std::make_shared<const FemOperators>(build_operators(grid));
  const PnpModel model(config.form(), problem.params, ops);
  const StateVector s0 = initial_state(problem.initial, model);
  const int n = config.steps();
  const double setup_seconds = since(setup_start);
  fs::create_directories(config.output_dir);

  RunSummary summary;
  const int every = config.emit_fields_every;
  auto dump = [&](const StateVector& s, int step) {
    const std::string name = "fields_" + std::to_string(step) + ".csv";
    write_atomic(path_in(config, name), fields_csv(grid, *ops, s, problem.params));
    summary.files.push_back(name);
  };
  if (every > 0) dump(s0, 0);

  std::string series = "step,t,mass_plus,mass_minus,qn_deficit,min_c_plus,min_c_minus,max_c_plus,max_c_minus,peclet_margin\n";
  int last_dumped = 0;
  StateVector last_good = s0;
  AdvanceOptions opts;
  opts.record = true;
  opts.on_step = [&](const StateVector& s, const StepRecord& r) {
    series += series_row(r);
    if (profile_x) last_good = s;
    if (every > 0 && (r.step % every == 0 || r.step == n)) {
      dump(s, r.step);
      last_dumped = r.step;
    }
  };
  const Trajectory tr = advance(model, s0, config.dt(), n, config.time_scheme(), opts);
  summary.blew_up = tr.blew_up;
  summary.steps = tr.steps_taken;
  summary.blowup_step = tr.blowup_step;

  write_atomic(path_in(config, "series.csv"), series);
  summary.files.push_back("series.csv");

  if (profile_x) {
    // After a blow-up this is the last step that passed the checks.
    write_atomic(path_in(config, "profile.csv"), profile_csv(grid, *ops, last_good, problem.params, *profile_x));
    summary.files.push_back("profile.csv");
  }

  double step_total = 0.0;
  for (const StepRecord& r : tr.records) step_total += r.seconds;
  json report;
  report["config"] = config_json(config);
  report["verdict"] = tr.blew_up ? "unstable" : "stable";
  report["steps_requested"] = n;
  report["steps_taken"] = tr.steps_taken;
  report["blowup_step"] = tr.blew_up ? json(tr.blowup_step) : json(nullptr);
  if (!tr.failure.empty()) report["failure"] = tr.failure;
  report["dt"] = config.dt();
  report["h"] = ops->h;
  report["active_nodes"] = ops->n_active();
  report["linear_solver"] = SparseLU::backend();
  report["initial"] = diagnostics_json(diagnostics(s0, model));
  if (!tr.records.empty()) report["final"] = diagnostics_json(tr.records.back().diag);
  report["timings"] = {{"setup_seconds", setup_seconds},
                       {"run_seconds", tr.seconds},
                       {"mean_step_seconds", tr.records.empty() ? 0.0 : step_total / tr.records.size()}};
  report["fields_last_step"] = every > 0 ? json(last_dumped) : json(nullptr);
  summary.files.push_back("report.json");
  report["files"] = summary.files;
  write_atomic(path_in(config, "report.json"), report.dump(2) + "\n");
  return summary;
}

std::vector<ConvergenceReport> run_converge(const RunConfig& config, const ConvergeOptions& options) {
  validate(config);
  if (!(options.dt0_over_h > 0.0)) throw ConfigError("dt0: must be positive");
  const std::vector<double> eps = options.epsilons.empty() ? std::vector<double>{config.epsilon} : options.epsilons;
  const auto ops = config.problem().build_operators();
  const Scheme scheme = config.time_scheme();
  std::vector<ConvergenceReport> reports;
  json out = json::array();
  std::string csv = "epsilon,scheme,formulation,dt,error,order\n";
  for (double e : eps) {
    RunConfig c = config;
    c.epsilon = e;
    validate(c);
    Problem p = c.problem();
    ConvergenceReport r =
        convergence_study(p, ops, c.form(), scheme, c.T, options.dt0_over_h * ops->h, options.levels);
    json levels = json::array();
    for (const auto& l : r.levels) {
      levels.push_back({{"dt", l.dt},
                        {"steps", l.run.steps},
                        {"stable", !l.run.blew_up},
                        {"blowup_step", l.run.blew_up ? json(l.run.blowup_step) : json(nullptr)},
                        {"mass_drift", l.run.mass_drift},
                        {"seconds", l.run.seconds}});
    }
    json errs = json::array(), ords = json::array();
    for (const auto& v : r.errors) errs.push_back(optional_json(v));
    for (const auto& v : r.orders) ords.push_back(optional_json(v));
    out.push_back({{"scheme", r.scheme},
                   {"formulation", formulation_name(r.formulation)},
                   {"epsilon", r.epsilon},
                   {"levels", levels},
                   {"errors", errs},
                   {"orders", ords},
                   {"stable", r.stable},
                   {"verdict", r.verdict}});
    for (std::size_t k = 0; k < r.errors.size(); ++k) {
      const std::optional<double> ord = k < r.orders.size() ? r.orders[k] : std::nullopt;
      csv += fmt17(e) + "," + r.scheme + "," + formulation_name(r.formulation) + "," + fmt17(r.levels[k].dt) + "," +
             opt17(r.errors[k]) + "," + opt17(ord) + "\n";
    }
    reports.push_back(std::move(r));
  }
  json doc = {{"config", config_json(config)},
              {"levels", options.levels},
              {"dt0", options.dt0_over_h * ops->h},
              {"metric", "L2 norm of the (c_plus, c_minus) difference between successive dt levels"},
              {"studies", out}};
  write_atomic(path_in(config, "convergence.json"), doc.dump(2) + "\n");
  write_atomic(path_in(config, "convergence.csv"), csv);
  return reports;
}

StabilityMatrix run_scan(const RunConfig& config, const ScanOptions& options) {
  validate(config);
  ScanSpec spec;
  for (const auto& s : options.schemes) spec.schemes.push_back(parse_scheme(s));
  for (const auto& f : options.formulations) spec.formulations.push_back(parse_formulation(f));
  for (double e : options.epsilons) {
    if (!(std::isfinite(e) && e >= 0.0)) throw ConfigError("epsilons: values must be finite and >= 0");
  }
  spec.epsilons = options.epsilons;
  spec.dt_over_h = config.dt_over_h;
  spec.t_final = config.T;
  spec.threads = options.threads > 0 ? options.threads : default_threads();
  const StabilityMatrix m = stability_scan(config.problem(), spec);

  json cells = json::array();
  std::string csv = "scheme,formulation,epsilon,applicable,verdict,blowup_step,steps,mass_drift,seconds\n";
  for (const ScanCell& c : m.cells) {
    const std::string verdict = !c.applicable ? "n/a" : c.stable ? "stable" : "unstable";
    cells.push_back({{"scheme", c.scheme.name()},
                     {"formulation", formulation_name(c.formulation)},
                     {"epsilon", c.epsilon},
                     {"applicable", c.applicable},
                     {"verdict", verdict},
                     {"blowup_step", c.stable ? json(nullptr) : json(c.blowup_step)},
                     {"steps", c.steps},
                     {"mass_drift", c.mass_drift},
                     {"seconds", c.seconds}});
    csv += c.scheme.name() + "," + formulation_name(c.formulation) + "," + fmt17(c.epsilon) + "," +
           (c.applicable ? "1" : "0") + "," + verdict + "," + (c.stable ? "" : std::to_string(c.blowup_step)) + "," +
           std::to_string(c.steps) + "," + fmt17(c.mass_drift) + "," + fmt17(c.seconds) + "\n";
  }
  json doc = {{"config", config_json(config)},
              {"cells", cells},
              {"monotonicity_violations", m.monotonicity_violations}};
  write_atomic(path_in(config, "scan.json"), doc.dump(2) + "\n");
  write_atomic(path_in(config, "scan.csv"), csv);
  return m;
}

std::string timing_csv(const TimingReport& report) {
  std::string csv = "epsilon,t_primitive,t_cq\n";
  for (const TimingRow& r : report.rows) {
    csv += fmt17(r.epsilon) + "," + opt17(r.primitive) + "," + opt17(r.quasi_neutral) + "\n";
  }
  return csv;
}

TimingReport run_timing(const RunConfig& config, const TimingOptions& options) {
  validate(config);
  if (options.iterations < 0) throw ConfigError("iterations: must be >= 0");
  const TimingReport rep =
      timing_report(config.problem(), {Formulation::Primitive, Formulation::QuasiNeutral}, options.epsilons,
                    config.time_scheme(), config.dt_over_h, options.iterations);
  json rows = json::array();
  std::optional<double> first_ratio, last_ratio;
  for (const TimingRow& r : rep.rows) {
    std::optional<double> ratio;
    if (r.primitive && r.quasi_neutral && *r.primitive > 0.0) ratio = *r.quasi_neutral / *r.primitive;
    if (ratio && !first_ratio) first_ratio = ratio;
    if (ratio) last_ratio = ratio;
    rows.push_back({{"epsilon", r.epsilon},
                    {"t_primitive", optional_json(r.primitive)},
                    {"t_cq", optional_json(r.quasi_neutral)},
                    {"spread_primitive", optional_json(r.primitive_spread)},
                    {"spread_cq", optional_json(r.quasi_neutral_spread)},
                    {"cq_over_primitive", optional_json(ratio)}});
  }
  json doc = {{"config", config_json(config)},
              {"scheme", rep.scheme},
              {"iterations", rep.iterations},
              {"rows", rows}};
  if (first_ratio && last_ratio && rep.rows.size() > 1) {
    const bool grows = *last_ratio > *first_ratio;
    doc["cq_relative_cost_grows"] = grows;
    if (!grows) doc["warning"] = "CQ cost relative to primitive did not grow as epsilon decreased on this machine";
  }
  write_atomic(path_in(config, "timing.json"), doc.dump(2) + "\n");
  write_atomic(path_in(config, "timing.csv"), timing_csv(rep));
  return rep;
}

}  // namespace pnp
