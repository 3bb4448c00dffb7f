#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pnp/errors.hpp"
#include "pnp/linalg.hpp"
#include "pnp/model.hpp"
#include "pnp/tableau.hpp"

namespace pnp {

/// An IMEX tableau or the standard split (potential, then Crank–Nicolson) scheme.
struct Scheme {
  bool split = false;
  TableauId tableau = TableauId::I2;

  static Scheme imex(TableauId id) { return {false, id}; }
  static Scheme split_scheme() { return {true, TableauId::I2}; }
  std::string name() const;
};

Scheme parse_scheme(const std::string& name);  // "I1".."I6" or "split"

struct StageStats {
  int stage = 0;
  bool solved = false;  // false for stages closed explicitly (zero diagonal)
  double factorize_seconds = 0.0;
  double solve_seconds = 0.0;
  double residual = 0.0;      // normwise backward error of the stage solve
  double row_residual = 0.0;  // componentwise (row-wise) backward error
  double rcond = 0.0;
};

struct StepResult {
  StateVector state;
  std::vector<StageStats> stages;
  bool blew_up = false;
};

/// Raised when a stage matrix cannot be factorized; carries the stage index.
class StageFailure : public SingularMatrixError {
public:
  StageFailure(int stage, const std::string& what);
  int stage() const { return stage_; }

private:
  int stage_;
};

class ImexIntegrator {
public:
  ImexIntegrator(const PnpModel& model, ButcherTableau tab);

  StepResult step(const StateVector& state, double dt);
  const ButcherTableau& tableau() const { return tab_; }

private:
  enum class UpdateRule { LastStage, StageCombination, Flux };

  const PnpModel& model_;
  ButcherTableau tab_;
  UpdateRule rule_;
  Eigen::VectorXd combination_;  // b^T A^{-1}
  BlockStageSolver solver_;
};

/// Primitive only: Poisson solve for Φⁿ, then two decoupled trapezoidal
/// drift-diffusion solves with G[Φⁿ] frozen.
class SplitIntegrator {
public:
  explicit SplitIntegrator(const PnpModel& model);

  StepResult step(const StateVector& state, double dt);

private:
  const PnpModel& model_;
  SparseLU lu_plus_;
  SparseLU lu_minus_;
};

/// Type-erased single-step driver over either scheme family.
class Stepper {
public:
  Stepper(const PnpModel& model, const Scheme& scheme);
  StepResult step(const StateVector& state, double dt);
  const Scheme& scheme() const { return scheme_; }

private:
  Scheme scheme_;
  std::unique_ptr<ImexIntegrator> imex_;
  std::unique_ptr<SplitIntegrator> split_;
};

/// Non-finite values or growth past this factor of the initial sup norm.
inline constexpr double kBlowupFactor = 1e12;

struct StepRecord {
  int step = 0;
  double t = 0.0;
  Diagnostics diag;
  PecletReport peclet;
  double seconds = 0.0;
};

struct Trajectory {
  StateVector initial;
  StateVector final_state;
  int steps_taken = 0;
  bool blew_up = false;
  int blowup_step = -1;
  std::string failure;  // stage failure message, if any
  std::vector<StepRecord> records;  // one per completed step
  double seconds = 0.0;
};

struct AdvanceOptions {
  bool record = true;
  /// Called after every completed step with the new state.
  std::function<void(const StateVector&, const StepRecord&)> on_step;
  /// Stop early once this returns true (checked after each step).
  std::function<bool(const StepRecord&)> stop_when;
};

Trajectory advance(const PnpModel& model, const StateVector& initial, double dt, int n_steps,
                   const Scheme& scheme, const AdvanceOptions& options = {});

/// Number of steps of size dt reaching t_final exactly; throws ConfigError if
/// t_final is not an integer multiple of dt (to 1e-9 relative).
int step_count(double t_final, double dt);

}  // namespace pnp
