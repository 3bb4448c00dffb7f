#include "pnp/integrator.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double weighted_mean(const Vector& v, const Vector& m) { return m.dot(v) / m.sum(); }

// The two mass-weighted unknowns of a state: (c+, c-) or (C, ρ).
struct Differential {
  Vector x0, x1;
};

Differential differential_part(const StateVector& s) {
  if (s.form == Formulation::Primitive) return {s.blocks[0], s.blocks[1]};
  return {s.blocks[0], s.charge};
}

// Per-stage data of the QuasiNeutral charge decomposition ρ = εQ̃ + ρ̄.
struct ChargeSplit {
  double eps = 0.0;
  double mean = 0.0;  // ρ̄, conserved by every stage
};

StateVector assemble_state(const PnpModel& model, const Differential& x, const Vector& q_tilde, Vector phi,
                           double t, const ChargeSplit& cs) {
  StateVector s;
  s.form = model.formulation();
  s.t = t;
  s.blocks[0] = x.x0;
  if (s.form == Formulation::Primitive) {
    s.blocks[1] = x.x1;
  } else {
    s.charge = x.x1;
    s.blocks[1] = cs.eps > 0.0 ? Vector(q_tilde.array() + cs.mean / cs.eps) : q_tilde;
  }
  s.blocks[2] = std::move(phi);
  return s;
}

// Predictor state for Θ: only the differential blocks matter; Φ is closed by
// the formulation's constraint so the state is self-consistent.
StateVector predictor_state(const PnpModel& model, const Differential& x, double t, const ChargeSplit& cs) {
  StateVector s;
  s.form = model.formulation();
  s.t = t;
  s.blocks[0] = x.x0;
  if (s.form == Formulation::Primitive) {
    s.blocks[1] = x.x1;
    s.blocks[2] = model.closing_potential(s);
  } else {
    s.charge = x.x1;
    if (cs.eps > 0.0) {
      s.blocks[1] = x.x1 / cs.eps;
      s.blocks[2] = model.closing_potential(s);
    } else {
      s.blocks[1] = Vector::Zero(model.n());
      s.blocks[2] = Vector::Zero(model.n());
    }
  }
  return s;
}

}  // namespace

std::string Scheme::name() const { return split ? "split" : tableau_name(tableau); }

Scheme parse_scheme(const std::string& name) {
  if (name == "split") return Scheme::split_scheme();
  return Scheme::imex(parse_tableau(name));
}

StageFailure::StageFailure(int stage, const std::string& what)
    : SingularMatrixError("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}

namespace {

// The (C, Q̃, Φ) system keeps its Q̃ pivot on the Poisson row (-B, never zero)
// and its Φ pivot on the charge row, which stays regular as ε -> 0.
BlockRowLayout stage_layout(Formulation form) {
  BlockRowLayout l;
  if (form == Formulation::QuasiNeutral) l.position = {0, 2, 1};
  return l;
}

}  // namespace

ImexIntegrator::ImexIntegrator(const PnpModel& model, ButcherTableau tab)
    : model_(model),
      tab_(std::move(tab)),
      rule_(UpdateRule::Flux),
      solver_(model.ops().assembler->pattern(), model.ops().lumped,
              model.formulation() == Formulation::QuasiNeutral ? std::vector<int>{1, 2} : std::vector<int>{2}, stage_layout(model.formulation())) {
  validate_tableau(tab_);
  const auto diag = tab_.a_implicit.diagonal();
  if (tab_.stiffly_accurate) {
    rule_ = UpdateRule::LastStage;
  } else if ((diag.array() != 0.0).all()) {
    // 𝔅 Q^{n+1} = 𝔅 Qⁿ + Σ (bᵀA⁻¹)_i 𝔅 (Q_I^i - Qⁿ): same update, no 1/ε.
    rule_ = UpdateRule::StageCombination;
    const Eigen::MatrixXd a = tab_.a_implicit;
    combination_ = a.transpose().triangularView<Eigen::Upper>().solve(tab_.b);
  }
}

StepResult ImexIntegrator::step(const StateVector& state, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt: must be positive");
  if (state.form != model_.formulation()) throw DataError("imex step: state formulation does not match the model");
  const FemOperators& ops = model_.ops();
  const SparseMatrix& bm = ops.mass.matrix;
  const bool cq = model_.formulation() == Formulation::QuasiNeutral;
  const int n = model_.n();
  const int s = tab_.s;

  ChargeSplit cs{model_.params().epsilon, 0.0};
  const Differential xn = differential_part(state);
  Vector q_tilde_n;
  if (cq) {
    cs.mean = weighted_mean(state.charge, ops.lumped);
    q_tilde_n = state.blocks[1].array() - weighted_mean(state.blocks[1], ops.lumped);
  }
  const Vector bx0 = bm * xn.x0;
  const Vector bx1 = bm * xn.x1;

  std::vector<std::array<Vector, 2>> flux(s);
  std::vector<Differential> xi(s);
  std::vector<Vector> qi(s), phii(s);
  StepResult result;

  for (int i = 0; i < s; ++i) {
    const double ti = state.t + dt * tab_.c_explicit()[i];
    Differential xe = xn;
    if (i > 0) {
      Vector r0 = Vector::Zero(n), r1 = Vector::Zero(n);
      for (int j = 0; j < i; ++j) {
        const double a = tab_.a_explicit(i, j);
        if (a == 0.0) continue;
        r0 += a * flux[j][0];
        r1 += a * flux[j][1];
      }
      xe.x0 += dt * model_.mass_solve(r0);
      xe.x1 += dt * model_.mass_solve(r1);
    }
    const StateVector se = predictor_state(model_, xe, ti, cs);
    if (!se.finite()) {
      result.blew_up = true;
      result.state = se;
      return result;
    }
    const auto [mass_blocks, theta] = build_blocks(model_, se);

    Vector h0 = Vector::Zero(n), h1 = Vector::Zero(n);
    for (int j = 0; j < i; ++j) {
      const double a = tab_.a_implicit(i, j);
      if (a == 0.0) continue;
      h0 += a * flux[j][0];
      h1 += a * flux[j][1];
    }

    StageStats st;
    st.stage = i;
    const double aii = tab_.a_implicit(i, i);
    if (aii != 0.0) {
      solver_.clear();
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) {
          if (!mass_blocks.is_zero(r, c)) solver_.add(r, c, 1.0, mass_blocks.at(r, c));
          if (!theta.is_zero(r, c)) solver_.add(r, c, -dt * aii, theta.at(r, c));
        }
      }
      for (int c = 0; c < 3; ++c) {
        if (!theta.is_zero(2, c)) solver_.add(2, c, 1.0, theta.at(2, c));
      }
      const auto t0 = Clock::now();
      try {
        solver_.factorize();
      } catch (const DataError&) {
        result.blew_up = true;
        result.state = se;
        return result;
      } catch (const SingularMatrixError& e) {
        throw StageFailure(i, e.what());
      }
      st.factorize_seconds = seconds_since(t0);
      st.rcond = solver_.lu().rcond();

      std::array<Vector, 3> rhs{bx0 + dt * h0, bx1 + dt * h1, Vector::Zero(n)};
      // With Q = Q̃ + ρ̄/ε the constant part of ε B Q is known: move it right.
      if (cq) rhs[1] -= cs.mean * ops.lumped;
      const auto t1 = Clock::now();
      auto sol = solver_.solve(rhs);
      st.solve_seconds = seconds_since(t1);
      st.residual = sol.residual;
      st.row_residual = sol.row_residual;
      st.solved = true;
      xi[i].x0 = std::move(sol.blocks[0]);
      if (cq) {
        qi[i] = std::move(sol.blocks[1]);
        xi[i].x1 = cs.eps * qi[i];
        xi[i].x1.array() += cs.mean;
      } else {
        xi[i].x1 = std::move(sol.blocks[1]);
      }
      phii[i] = std::move(sol.blocks[2]);
    } else {
      // Zero diagonal: the stage is explicit in the differential blocks.
      xi[i] = xn;
      if (i > 0) {
        xi[i].x0 += dt * model_.mass_solve(h0);
        xi[i].x1 += dt * model_.mass_solve(h1);
      }
      if (cq) {
        if (i == 0) {
          qi[i] = q_tilde_n;
        } else if (cs.eps > 0.0) {
          qi[i] = (xi[i].x1.array() - cs.mean) / cs.eps;
        } else {
          throw ConfigError("epsilon: 0 is not supported by tableaux with a later zero-diagonal stage");
        }
      }
      const StateVector closed = assemble_state(model_, xi[i], qi[i], Vector::Zero(n), ti, cs);
      phii[i] = (cq && cs.eps == 0.0) ? model_.poisson_solve(bm * qi[i]) : model_.closing_potential(closed);
    }
    result.stages.push_back(st);

    // Stage flux Θ(Q_E^i) Q_I^i on the differential rows (Q̃ suffices: only L acts on Q).
    const std::array<Vector, 3> yi{xi[i].x0, cq ? qi[i] : xi[i].x1, phii[i]};
    const auto fy = theta.apply(yi);
    flux[i] = {fy[0], fy[1]};
  }

  Differential x_new;
  Vector q_new, phi_new;
  bool close_phi = true;
  switch (rule_) {
    case UpdateRule::LastStage:
      x_new = xi[s - 1];
      q_new = qi[s - 1];
      phi_new = phii[s - 1];
      close_phi = false;
      break;
    case UpdateRule::StageCombination:
      x_new = xn;
      if (cq) q_new = q_tilde_n;
      for (int i = 0; i < s; ++i) {
        const double w = combination_[i];
        x_new.x0 += w * (xi[i].x0 - xn.x0);
        x_new.x1 += w * (xi[i].x1 - xn.x1);
        if (cq) q_new += w * (qi[i] - q_tilde_n);
      }
      break;
    case UpdateRule::Flux: {
      Vector r0 = Vector::Zero(n), r1 = Vector::Zero(n);
      for (int i = 0; i < s; ++i) {
        r0 += tab_.b[i] * flux[i][0];
        r1 += tab_.b[i] * flux[i][1];
      }
      x_new = {xn.x0 + dt * model_.mass_solve(r0), xn.x1 + dt * model_.mass_solve(r1)};
      if (cq) {
        if (!(cs.eps > 0.0)) throw ConfigError("epsilon: 0 needs an invertible or stiffly accurate tableau");
        q_new = (x_new.x1.array() - cs.mean) / cs.eps;
      }
      break;
    }
  }
  const double t_new = state.t + dt;
  result.state = assemble_state(model_, x_new, q_new, Vector::Zero(n), t_new, cs);
  if (close_phi) {
    result.state.blocks[2] = (cq && cs.eps == 0.0) ? model_.poisson_solve(bm * q_new)
                                                   : model_.closing_potential(result.state);
  } else {
    result.state.blocks[2] = std::move(phi_new);
  }
  result.blew_up = !result.state.finite();
  return result;
}

SplitIntegrator::SplitIntegrator(const PnpModel& model) : model_(model) {
  if (model.formulation() != Formulation::Primitive) {
    throw ConfigError("scheme: split requires the primitive formulation");
  }
  if (!(model.params().epsilon > 0.0)) throw ConfigError("epsilon: the split scheme needs epsilon > 0");
}

StepResult SplitIntegrator::step(const StateVector& state, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt: must be positive");
  const FemOperators& ops = model_.ops();
  const PhysicalParams& p = model_.params();
  const SparseMatrix& bm = ops.mass.matrix;
  const SparseMatrix& l = ops.stiffness.matrix;
  StepResult result;

  StageStats poisson;
  poisson.stage = 0;
  const auto t0 = Clock::now();
  const Vector phi = model_.closing_potential(state);
  poisson.solve_seconds = seconds_since(t0);
  poisson.solved = true;
  result.stages.push_back(poisson);
  if (!phi.allFinite()) {
    result.blew_up = true;
    result.state = state;
    return result;
  }
  const SparseMatrix g = ops.drift(phi, DriftMode::G).matrix;

  StateVector next = state;
  next.t = state.t + dt;
  const double sign[2] = {1.0, -1.0};
  const double diff[2] = {p.d_plus, p.d_minus};
  SparseLU* lus[2] = {&lu_plus_, &lu_minus_};
  for (int k = 0; k < 2; ++k) {
    const SparseMatrix op = diff[k] * (l + sign[k] * g);
    const SparseMatrix lhs = bm + 0.5 * dt * op;
    const Vector rhs = bm * state.blocks[k] - 0.5 * dt * (op * state.blocks[k]);
    StageStats st;
    st.stage = k + 1;
    const auto t1 = Clock::now();
    try {
      lus[k]->factorize(lhs);
    } catch (const DataError&) {
      result.blew_up = true;
      result.state = state;
      return result;
    } catch (const SingularMatrixError& e) {
      throw StageFailure(k + 1, e.what());
    }
    st.factorize_seconds = seconds_since(t1);
    st.rcond = lus[k]->rcond();
    const auto t2 = Clock::now();
    next.blocks[k] = lus[k]->solve(rhs);
    st.solve_seconds = seconds_since(t2);
    const BackwardError be = backward_error(lhs, next.blocks[k], rhs);
    st.residual = be.normwise;
    st.row_residual = be.componentwise;
    st.solved = true;
    result.stages.push_back(st);
  }
  next.blocks[2] = model_.closing_potential(next);
  result.blew_up = !next.finite();
  result.state = std::move(next);
  return result;
}

Stepper::Stepper(const PnpModel& model, const Scheme& scheme) : scheme_(scheme) {
  if (scheme.split) {
    split_ = std::make_unique<SplitIntegrator>(model);
  } else {
    imex_ = std::make_unique<ImexIntegrator>(model, tableau(scheme.tableau));
  }
}

StepResult Stepper::step(const StateVector& state, double dt) {
  return split_ ? split_->step(state, dt) : imex_->step(state, dt);
}

int step_count(double t_final, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt: must be a finite positive number");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ConfigError("T: must be finite and >= 0");
  const double q = t_final / dt;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9 * std::max(1.0, q)) {
    throw ConfigError("T: final time is not an integer multiple of dt");
  }
  return static_cast<int>(r);
}

Trajectory advance(const PnpModel& model, const StateVector& initial, double dt, int n_steps,
                   const Scheme& scheme, const AdvanceOptions& options) {
  Trajectory tr;
  tr.initial = initial;
  tr.final_state = initial;
  if (n_steps <= 0) return tr;
  Stepper stepper(model, scheme);
  const double limit = kBlowupFactor * initial.max_abs();
  const auto start = Clock::now();
  StateVector current = initial;
  for (int k = 1; k <= n_steps; ++k) {
    const auto t0 = Clock::now();
    StepResult res;
    try {
      res = stepper.step(current, dt);
    } catch (const StageFailure& e) {
      tr.blew_up = true;
      tr.blowup_step = k;
      tr.failure = e.what();
      break;
    }
    res.state.t = initial.t + k * dt;
    if (res.blew_up || !(res.state.max_abs() <= limit)) {
      tr.blew_up = true;
      tr.blowup_step = k;
      tr.final_state = std::move(res.state);
      break;
    }
    current = std::move(res.state);
    StepRecord rec;
    rec.step = k;
    rec.t = current.t;
    rec.seconds = seconds_since(t0);
    if (options.record || options.on_step || options.stop_when) {
      rec.diag = diagnostics(current, model);
      rec.peclet = peclet_guard(current, model.params(), model.ops().h);
    }
    tr.steps_taken = k;
    if (options.on_step) options.on_step(current, rec);
    const bool stop = options.stop_when && options.stop_when(rec);
    if (options.record) tr.records.push_back(std::move(rec));
    if (stop) break;
  }
  if (!tr.blew_up) tr.final_state = current;
  tr.seconds = seconds_since(start);
  return tr;
}

}  // namespace pnp
