#pragma once

#include <Eigen/SparseCholesky>
#include <array>
#include <memory>
#include <string>
#include <utility>

#include "pnp/fem.hpp"
#include "pnp/linalg.hpp"

namespace pnp {

enum class Formulation { Primitive, QuasiNeutral };

std::string formulation_name(Formulation form);
Formulation parse_formulation(const std::string& name);  // throws ConfigError
std::array<std::string, 3> block_labels(Formulation form);

struct PhysicalParams {
  double epsilon = 1e-4;
  double d_plus = 1.5;
  double d_minus = 0.5;
  double m_plus = 23.0;
  double m_minus = 265.0;

  double d_tilde() const { return 0.5 * (d_plus + d_minus); }
  double d_hat() const { return 0.5 * (d_plus - d_minus); }

  /// Throws ConfigError naming the offending field. ε = 0 requires QuasiNeutral.
  void validate(Formulation form) const;
};

/// Two Gaussian bumps of equal mass v0, one per species.
struct InitialData {
  double v0 = 1e-6;
  double sigma = 0.05;
  Point center_plus{0.4, 0.2};
  Point center_minus{0.6, 0.2};

  double peak() const { return v0 / (2.0 * sigma * sigma); }
  double gaussian(Point c, Point p) const;
};

/// Nodal blocks [c+, c-, Φ] or [C, Q, Φ] over the active dofs.
///
/// QuasiNeutral states also carry the charge ρ = c+/m+ - c-/m- explicitly.
/// For ε > 0 it equals εQ. At ε = 0 the mean of Q is unbounded, so the Q
/// block holds only its zero-mean part and ρ keeps the (conserved) mean.
struct StateVector {
  Formulation form = Formulation::Primitive;
  double t = 0.0;
  std::array<Vector, 3> blocks;
  Vector charge;  // QuasiNeutral only

  int size() const { return static_cast<int>(blocks[0].size()); }
  bool finite() const;
  double max_abs() const;
};

/// c+/m+ and c-/m-, the number densities both formulations agree on.
struct SpeciesDensities {
  Vector plus;
  Vector minus;
};

/// Sparse 3x3 block operator; an empty block (0x0) stands for zero.
struct BlockOperator {
  int n = 0;
  std::array<SparseMatrix, 9> blocks;

  SparseMatrix& at(int r, int c) { return blocks[r * 3 + c]; }
  const SparseMatrix& at(int r, int c) const { return blocks[r * 3 + c]; }
  bool is_zero(int r, int c) const { return at(r, c).size() == 0; }
  std::array<Vector, 3> apply(const std::array<Vector, 3>& x) const;
};

/// Physics on a fixed discrete domain: parameters, operators and the two
/// reusable factorizations (consistent mass, mean-constrained Laplacian).
class PnpModel {
public:
  PnpModel(Formulation form, PhysicalParams params, std::shared_ptr<const FemOperators> ops);

  Formulation formulation() const { return form_; }
  const PhysicalParams& params() const { return params_; }
  const FemOperators& ops() const { return *ops_; }
  int n() const { return ops_->n_active(); }

  Vector mass_solve(const Vector& rhs) const;
  /// Φ with L Φ = rhs - λ m and m^T Φ = 0.
  Vector poisson_solve(const Vector& rhs) const;

  /// Φ closing the formulation's Poisson constraint for the given state.
  Vector closing_potential(const StateVector& state) const;

  /// Coefficients w0, w1 of the drift blocks of rows 0 and 1, without
  /// their signs and scalings: (c+, c-) or (D₊p − D₋n, D₊p + D₋n) with
  /// p, n the number densities. Negative densities are clipped to zero.
  std::pair<Vector, Vector> drift_coefficients(const StateVector& state) const;

private:
  Formulation form_;
  PhysicalParams params_;
  std::shared_ptr<const FemOperators> ops_;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> mass_lu_;
  std::shared_ptr<MeanConstrainedSolver> poisson_;
};

/// Throws ConfigError for ε = 0 with the primitive formulation.
StateVector initial_state(const InitialData& data, const PnpModel& model);

/// Rebuilds a state from species densities (c±/m±) in the model's formulation.
StateVector state_from_densities(const SpeciesDensities& d, const PnpModel& model, double t = 0.0);
SpeciesDensities densities(const StateVector& state, const PhysicalParams& params);

/// Primitive ↔ QuasiNeutral, including the closing potential of the target.
StateVector convert(const StateVector& state, const PnpModel& target);

/// (𝔅^ε, Θ[state_E]). Θ row 2 is the constraint residual:
/// B(c+/m+ - c-/m-) - εLΦ for Primitive, LΦ - BQ for QuasiNeutral.
std::pair<BlockOperator, BlockOperator> build_blocks(const PnpModel& model, const StateVector& state_e);

struct PecletReport {
  bool ok = true;
  double threshold = 0.0;  // 2 ε / h²
  double worst = 0.0;      // max over nodes of c±/m±
  double margin = 0.0;     // threshold - worst, negative on violation
  int node = -1;
};

PecletReport peclet_guard(const StateVector& state, const PhysicalParams& params, double h);

struct Diagnostics {
  double mass_plus = 0.0;
  double mass_minus = 0.0;
  double qn_deficit = 0.0;
  std::array<double, 3> block_min{};
  std::array<double, 3> block_max{};
  double min_c_plus = 0.0, max_c_plus = 0.0;
  double min_c_minus = 0.0, max_c_minus = 0.0;
};

Diagnostics diagnostics(const StateVector& state, const PnpModel& model);

}  // namespace pnp
