#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <memory>
#include <string>
#include <vector>

#include "pnp/geometry.hpp"

namespace pnp {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;  // column-major, compressed

/// Bilinear shape functions on the unit reference square, vertex order SW, SE, NE, NW.
namespace q1 {
std::array<double, 4> values(double xi, double eta);
/// Reference-coordinate gradients; divide by h for physical gradients.
std::array<std::array<double, 2>, 4> gradients(double xi, double eta);
}  // namespace q1

/// One quadrature point of a cell rule, with the four shape functions and
/// their physical gradients already evaluated.
struct QuadraturePoint {
  double weight = 0.0;
  std::array<double, 4> value{};
  std::array<std::array<double, 2>, 4> grad{};
};

/// Integration rule for cell ∩ Ω_h plus the active dofs of its vertices.
struct CellRule {
  int i = 0;
  int j = 0;
  bool cut = false;
  double area = 0.0;
  std::array<int, 4> dofs{};
  std::vector<QuadraturePoint> points;
};

/// Clipped polygon of a boundary cell and its triangle-fan quadrature.
///
/// Snapping bounds polygon areas from below: every polygon contains a right
/// triangle whose legs are at least h^2 long (the level-set value of its
/// internal vertex), so area >= kMinAreaFactor * h^4.
struct CutCellGeometry {
  static constexpr double kMinAreaFactor = 0.5;

  std::vector<Point> polygon;        // counter-clockwise, physical coordinates
  std::vector<double> triangle_areas;  // signed fan areas from the vertex centroid
  std::vector<Point> ref_points;     // quadrature points, reference coordinates
  std::vector<double> weights;       // physical weights

  double area() const;
};

/// Clips cell (i, j) against the chord approximation of the boundary.
/// Throws GeometryError when the cell is not cut (all vertices on one side).
CutCellGeometry clip_cell(const LevelSetGrid& grid, int i, int j);

enum class DriftMode { H, G };

/// Sparse matrix over active dofs annotated with the bilinear form it realizes.
struct SparseOperator {
  SparseMatrix matrix;
  bool symmetric = false;
  std::string form;

  int size() const { return static_cast<int>(matrix.rows()); }
  Vector apply(const Vector& x) const { return matrix * x; }
};

/// Precomputed cell rules and a fixed Q1 sparsity pattern; every operator it
/// produces shares that pattern exactly, which the stage solvers rely on.
class FemAssembler {
public:
  explicit FemAssembler(const LevelSetGrid& grid);

  int n_active() const { return n_active_; }
  double domain_area() const { return area_; }
  const std::vector<CellRule>& cells() const { return cells_; }
  const SparseMatrix& pattern() const { return pattern_; }

  SparseOperator mass() const;
  SparseOperator stiffness() const;
  /// H: M·Φ ≈ (w∇Φ, ∇v). G: M·c ≈ (c∇w, ∇v). Both contract T(c, Φ, v) = (c∇Φ, ∇v).
  SparseOperator drift(const Vector& w, DriftMode mode) const;

private:
  int n_active_ = 0;
  double area_ = 0.0;
  std::vector<CellRule> cells_;
  SparseMatrix pattern_;
  std::vector<std::array<int, 16>> scatter_;  // (cell, a*4+b) -> value slot
};

SparseOperator assemble_mass(const LevelSetGrid& grid);
SparseOperator assemble_stiffness(const LevelSetGrid& grid);
SparseOperator assemble_drift(const LevelSetGrid& grid, const Vector& w, DriftMode mode);

/// Constant operators of a discrete domain, built once per run.
struct FemOperators {
  std::shared_ptr<const FemAssembler> assembler;
  SparseOperator mass;
  SparseOperator stiffness;
  Vector lumped;  // mass row sums = ∫ v_i
  std::vector<Point> dof_points;
  double h = 0.0;  // grid spacing

  int n_active() const { return assembler->n_active(); }
  double area() const { return assembler->domain_area(); }
  SparseOperator drift(const Vector& w, DriftMode mode) const { return assembler->drift(w, mode); }
};

FemOperators build_operators(const LevelSetGrid& grid);

}  // namespace pnp
