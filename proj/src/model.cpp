#include "pnp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnp/errors.hpp"

namespace pnp {

std::string formulation_name(Formulation form) {
  return form == Formulation::Primitive ? "primitive" : "quasi_neutral";
}

Formulation parse_formulation(const std::string& name) {
  if (name == "primitive") return Formulation::Primitive;
  if (name == "quasi_neutral" || name == "cq") return Formulation::QuasiNeutral;
  throw ConfigError("formulation: unknown value '" + name + "' (expected primitive or quasi_neutral)");
}

std::array<std::string, 3> block_labels(Formulation form) {
  if (form == Formulation::Primitive) return {"c_plus", "c_minus", "phi"};
  return {"C", "Q", "phi"};
}

void PhysicalParams::validate(Formulation form) const {
  auto positive = [](double v, const char* key) {
    if (!(std::isfinite(v) && v > 0.0)) throw ConfigError(std::string(key) + ": must be a finite positive number");
  };
  if (!(std::isfinite(epsilon) && epsilon >= 0.0)) throw ConfigError("epsilon: must be finite and >= 0");
  if (epsilon == 0.0 && form == Formulation::Primitive) {
    throw ConfigError("epsilon: 0 is only supported by the quasi_neutral formulation");
  }
  positive(d_plus, "d_plus");
  positive(d_minus, "d_minus");
  positive(m_plus, "m_plus");
  positive(m_minus, "m_minus");
}

double InitialData::gaussian(Point c, Point p) const {
  const double dx = p.x - c.x;
  const double dy = p.y - c.y;
  return peak() * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

bool StateVector::finite() const {
  for (const auto& b : blocks) {
    if (!b.allFinite()) return false;
  }
  return charge.allFinite();
}

double StateVector::max_abs() const {
  double m = 0.0;
  for (const auto& b : blocks) {
    if (b.size() > 0) m = std::max(m, b.cwiseAbs().maxCoeff());
  }
  return m;
}

std::array<Vector, 3> BlockOperator::apply(const std::array<Vector, 3>& x) const {
  std::array<Vector, 3> y;
  for (int r = 0; r < 3; ++r) {
    y[r] = Vector::Zero(n);
    for (int c = 0; c < 3; ++c) {
      if (!is_zero(r, c)) y[r] += at(r, c) * x[c];
    }
  }
  return y;
}

PnpModel::PnpModel(Formulation form, PhysicalParams params, std::shared_ptr<const FemOperators> ops)
    : form_(form), params_(params), ops_(std::move(ops)) {
  params_.validate(form_);
  mass_lu_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(ops_->mass.matrix);
  if (mass_lu_->info() != Eigen::Success) throw SingularMatrixError("mass matrix is not positive definite");
  poisson_ = std::make_shared<MeanConstrainedSolver>(ops_->stiffness.matrix, ops_->lumped);
}

Vector PnpModel::mass_solve(const Vector& rhs) const { return mass_lu_->solve(rhs); }

Vector PnpModel::poisson_solve(const Vector& rhs) const { return poisson_->solve(rhs); }

Vector PnpModel::closing_potential(const StateVector& state) const {
  const SparseMatrix& b = ops_->mass.matrix;
  if (state.form == Formulation::Primitive) {
    const Vector rho = state.blocks[0] / params_.m_plus - state.blocks[1] / params_.m_minus;
    return poisson_solve(b * rho) / params_.epsilon;
  }
  // The constant part of Q only shifts the multiplier.
  return poisson_solve(b * state.blocks[1]);
}

std::pair<Vector, Vector> PnpModel::drift_coefficients(const StateVector& state) const {
  // Extrapolated predictors can dip below zero; a negative conductivity would
  // turn the implicit charge relaxation into growth, so only the positive part
  // of each species enters the coefficients.
  if (state.form == Formulation::Primitive) return {state.blocks[0].cwiseMax(0.0), state.blocks[1].cwiseMax(0.0)};
  const SpeciesDensities d = densities(state, params_);
  const Vector p = d.plus.cwiseMax(0.0), n = d.minus.cwiseMax(0.0);
  return {params_.d_plus * p - params_.d_minus * n, params_.d_plus * p + params_.d_minus * n};
}

SpeciesDensities densities(const StateVector& state, const PhysicalParams& params) {
  if (state.form == Formulation::Primitive) {
    return {state.blocks[0] / params.m_plus, state.blocks[1] / params.m_minus};
  }
  // C = p + n and ρ = p - n.
  return {0.5 * (state.blocks[0] + state.charge), 0.5 * (state.blocks[0] - state.charge)};
}

StateVector state_from_densities(const SpeciesDensities& d, const PnpModel& model, double t) {
  const PhysicalParams& p = model.params();
  StateVector s;
  s.form = model.formulation();
  s.t = t;
  if (s.form == Formulation::Primitive) {
    s.blocks[0] = p.m_plus * d.plus;
    s.blocks[1] = p.m_minus * d.minus;
    s.charge = Vector();
  } else {
    s.blocks[0] = d.plus + d.minus;
    s.charge = d.plus - d.minus;
    // Q = ρ/ε is unbounded at ε = 0; start the zero-mean part from rest there.
    s.blocks[1] = p.epsilon > 0.0 ? Vector(s.charge / p.epsilon) : Vector(Vector::Zero(model.n()));
  }
  if (s.form == Formulation::QuasiNeutral && p.epsilon == 0.0) {
    s.blocks[2] = Vector::Zero(model.n());
  } else {
    s.blocks[2] = model.closing_potential(s);
  }
  return s;
}

StateVector initial_state(const InitialData& data, const PnpModel& model) {
  if (!(data.sigma > 0.0)) throw ConfigError("sigma: must be positive");
  model.params().validate(model.formulation());
  const auto& pts = model.ops().dof_points;
  const int n = model.n();
  SpeciesDensities d{Vector(n), Vector(n)};
  for (int i = 0; i < n; ++i) {
    d.plus[i] = data.gaussian(data.center_plus, pts[i]) / model.params().m_plus;
    d.minus[i] = data.gaussian(data.center_minus, pts[i]) / model.params().m_minus;
  }
  return state_from_densities(d, model);
}

StateVector convert(const StateVector& state, const PnpModel& target) {
  if (state.form == target.formulation()) return state;
  return state_from_densities(densities(state, target.params()), target, state.t);
}

std::pair<BlockOperator, BlockOperator> build_blocks(const PnpModel& model, const StateVector& state_e) {
  if (state_e.form != model.formulation()) throw DataError("build_blocks: state formulation does not match the model");
  const FemOperators& ops = model.ops();
  const PhysicalParams& p = model.params();
  const SparseMatrix& b = ops.mass.matrix;
  const SparseMatrix& l = ops.stiffness.matrix;
  const double eps = p.epsilon;
  const auto [w0, w1] = model.drift_coefficients(state_e);

  BlockOperator mass, theta;
  mass.n = theta.n = model.n();
  if (model.formulation() == Formulation::Primitive) {
    mass.at(0, 0) = b;
    mass.at(1, 1) = b;
    theta.at(0, 0) = -p.d_plus * l;
    theta.at(0, 2) = -p.d_plus * ops.drift(w0, DriftMode::H).matrix;
    theta.at(1, 1) = -p.d_minus * l;
    theta.at(1, 2) = p.d_minus * ops.drift(w1, DriftMode::H).matrix;
    theta.at(2, 0) = b / p.m_plus;
    theta.at(2, 1) = -b / p.m_minus;
    theta.at(2, 2) = -eps * l;
  } else {
    mass.at(0, 0) = b;
    if (eps > 0.0) mass.at(1, 1) = eps * b;
    theta.at(0, 0) = -p.d_tilde() * l;
    if (eps > 0.0) theta.at(0, 1) = -eps * p.d_hat() * l;
    theta.at(0, 2) = -ops.drift(w0, DriftMode::H).matrix;
    theta.at(1, 0) = -p.d_hat() * l;
    if (eps > 0.0) theta.at(1, 1) = -eps * p.d_tilde() * l;
    theta.at(1, 2) = -ops.drift(w1, DriftMode::H).matrix;
    theta.at(2, 1) = -b;
    theta.at(2, 2) = l;
  }
  return {std::move(mass), std::move(theta)};
}

PecletReport peclet_guard(const StateVector& state, const PhysicalParams& params, double h) {
  const SpeciesDensities d = densities(state, params);
  PecletReport r;
  r.threshold = 2.0 * params.epsilon / (h * h);
  r.worst = -std::numeric_limits<double>::infinity();
  for (const Vector* v : {&d.plus, &d.minus}) {
    Eigen::Index idx = 0;
    const double m = v->maxCoeff(&idx);
    if (m > r.worst) {
      r.worst = m;
      r.node = static_cast<int>(idx);
    }
  }
  r.margin = r.threshold - r.worst;
  r.ok = r.worst < r.threshold;
  return r;
}

Diagnostics diagnostics(const StateVector& state, const PnpModel& model) {
  const PhysicalParams& p = model.params();
  const FemOperators& ops = model.ops();
  const SpeciesDensities d = densities(state, p);
  const Vector c_plus = p.m_plus * d.plus;
  const Vector c_minus = p.m_minus * d.minus;
  Diagnostics g;
  g.mass_plus = ops.lumped.dot(c_plus);
  g.mass_minus = ops.lumped.dot(c_minus);
  const Vector rho = d.plus - d.minus;
  g.qn_deficit = std::sqrt(std::max(0.0, rho.dot(ops.mass.matrix * rho)));
  for (int k = 0; k < 3; ++k) {
    g.block_min[k] = state.blocks[k].minCoeff();
    g.block_max[k] = state.blocks[k].maxCoeff();
  }
  g.min_c_plus = c_plus.minCoeff();
  g.max_c_plus = c_plus.maxCoeff();
  g.min_c_minus = c_minus.minCoeff();
  g.max_c_minus = c_minus.maxCoeff();
  return g;
}

}  // namespace pnp
