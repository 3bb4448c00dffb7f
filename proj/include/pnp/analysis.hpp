#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pnp/integrator.hpp"

namespace pnp {

/// ‖u‖ = √(uᵀBu). Throws DataError on size mismatch or non-finite input.
double l2_norm(const Vector& u, const SparseMatrix& mass);

/// Geometry, physics and initial data shared by every run of a study.
struct Problem {
  int n_cells = 100;
  bool obstacle = true;
  Point center{0.5, 0.5};
  double radius = 0.15;
  PhysicalParams params;
  InitialData initial;

  LevelSetGrid build_grid() const;
  std::shared_ptr<const FemOperators> build_operators() const;
};

/// Outcome of a single time-dependent run as seen by the estimators.
struct RunOutcome {
  bool blew_up = false;
  int blowup_step = -1;
  int steps = 0;
  double seconds = 0.0;
  double mass_drift = 0.0;  // max relative drift of 1ᵀBc± over the run
  StateVector final_state;
};

struct ConvergenceLevel {
  double dt = 0.0;
  RunOutcome run;
};

struct ConvergenceReport {
  std::string scheme;
  Formulation formulation = Formulation::QuasiNeutral;
  double epsilon = 0.0;
  std::vector<ConvergenceLevel> levels;
  std::vector<std::optional<double>> errors;  // eₖ = ‖u(dtₖ) − u(dtₖ₊₁)‖
  std::vector<std::optional<double>> orders;  // log₂(eₖ/eₖ₊₁)
  bool stable = true;
  std::string verdict;  // "converged", "unstable" or "degenerate"

  std::optional<double> finest_order() const;
};

/// Orders from successive errors. Missing, zero or non-finite errors leave the
/// affected orders empty.
std::vector<std::optional<double>> orders_from_errors(const std::vector<std::optional<double>>& errors);

/// Generic Richardson driver: run(dt) for dt0, dt0/2, ... and difference the
/// final states with `distance`.
ConvergenceReport richardson_orders(const std::function<RunOutcome(double)>& run,
                                    const std::function<double(const RunOutcome&, const RunOutcome&)>& distance,
                                    double dt0, int levels);

/// L² distance between the (c₊, c₋) fields of two final states.
double species_distance(const StateVector& a, const StateVector& b, const PnpModel& model);

/// One trajectory to t_final; throws ConfigError when t_final is not a multiple of dt.
RunOutcome simulate(const PnpModel& model, const StateVector& initial, const Scheme& scheme, double dt,
                    double t_final);

/// Richardson study for one (scheme, formulation, ε) over a shared operator set.
ConvergenceReport convergence_study(const Problem& problem, std::shared_ptr<const FemOperators> ops,
                                    Formulation form, const Scheme& scheme, double t_final, double dt0,
                                    int levels);

struct ScanCell {
  Scheme scheme;
  Formulation formulation = Formulation::Primitive;
  double epsilon = 0.0;
  bool applicable = true;  // split needs the primitive form, ε = 0 needs the quasi-neutral one
  bool stable = true;
  int blowup_step = -1;
  int steps = 0;
  double mass_drift = 0.0;
  double seconds = 0.0;
};

struct StabilityMatrix {
  std::vector<ScanCell> cells;
  /// Human-readable notes for (scheme, formulation) rows whose verdicts are
  /// not monotone in ε (unstable at ε but stable at a smaller ε).
  std::vector<std::string> monotonicity_violations;

  const ScanCell* find(const std::string& scheme, Formulation form, double epsilon) const;
};

struct ScanSpec {
  std::vector<Scheme> schemes;
  std::vector<Formulation> formulations;
  std::vector<double> epsilons;
  double dt_over_h = 1.0;
  double t_final = 0.1;
  int threads = 1;
};

bool applicable(const Scheme& scheme, Formulation form, double epsilon);

StabilityMatrix stability_scan(const Problem& problem, const ScanSpec& spec,
                               std::shared_ptr<const FemOperators> ops = nullptr);

struct TimingRow {
  double epsilon = 0.0;
  std::optional<double> primitive;  // mean seconds per iteration
  std::optional<double> quasi_neutral;
  std::optional<double> primitive_spread;  // sample standard deviation
  std::optional<double> quasi_neutral_spread;
};

struct TimingReport {
  std::string scheme;
  int iterations = 0;
  std::vector<TimingRow> rows;
};

/// Mean wall-clock per step after one warm-up step. Zero iterations give an
/// empty table.
TimingReport timing_report(const Problem& problem, const std::vector<Formulation>& formulations,
                           const std::vector<double>& epsilons, const Scheme& scheme, double dt_over_h,
                           int iterations, std::shared_ptr<const FemOperators> ops = nullptr);

/// Worker count from PNP_THREADS, else the machine's parallelism.
int default_threads();

}  // namespace pnp
