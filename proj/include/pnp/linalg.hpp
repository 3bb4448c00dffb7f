#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pnp/fem.hpp"

namespace pnp {

/// Library serving the dense kernels inside the sparse LU.
const char* dense_kernel_backend();

/// UMFPACK LU factorization. The symbolic analysis is kept across
/// factorize() calls as long as the sparsity pattern does not change.
class SparseLU {
public:
  SparseLU();
  ~SparseLU();
  SparseLU(const SparseLU&) = delete;
  SparseLU& operator=(const SparseLU&) = delete;
  SparseLU(SparseLU&& other) noexcept;
  SparseLU& operator=(SparseLU&& other) noexcept;

  /// Throws SingularMatrixError on a zero pivot, DataError on non-finite entries.
  void factorize(const SparseMatrix& a);
  Vector solve(const Vector& b) const;

  /// UMFPACK's cheap reciprocal condition estimate (min/max |U_ii|).
  double rcond() const { return rcond_; }
  double factorize_seconds() const { return factorize_seconds_; }
  int rows() const { return rows_; }
  static std::string backend();

  /// A diagonal entry is accepted as pivot when it is at least this fraction
  /// of the largest entry in its column (UMFPACK's default is 1e-3).
  void set_sym_pivot_tolerance(double tol) { sym_pivot_tolerance_ = tol; }

private:
  void release_numeric();
  void release_symbolic();

  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
  SparseMatrix matrix_;  // copy of the factorized matrix, needed by refinement
  int rows_ = 0;
  double rcond_ = 0.0;
  double factorize_seconds_ = 0.0;
  double sym_pivot_tolerance_ = 1e-3;
};

/// Stage matrices mix entries scaled by ε, dt and concentrations spanning many
/// decades. With the block layout every diagonal is structurally regular, and
/// a permissive tolerance keeps the fill-reducing order; off-diagonal pivoting
/// at ε = 1e-9 multiplies the fill tenfold. Accuracy is watched through the
/// backward error reported with every solve.
inline constexpr double kStagePivotTolerance = 1e-12;

/// Bordered system [A m; m^T 0] fixing the m-weighted mean of the solution.
struct BorderedSystem {
  SparseMatrix matrix;
  Vector rhs;
};

BorderedSystem apply_mean_constraint(const SparseMatrix& a, const Vector& b, const Vector& weights);

struct SolveOptions {
  /// When set, solve the bordered system with these weights (zero weighted mean).
  std::optional<Vector> mean_weights;
};

/// Direct sparse solve. A matrix whose factorization is numerically singular
/// (rcond below singular_rcond(n)) is rejected unless a mean constraint is given.
Vector solve_sparse(const SparseMatrix& a, const Vector& b, const SolveOptions& options = {});

inline constexpr double kSingularRcond = 1e-14;

/// A pivot ratio this small is roundoff: a singular n x n matrix leaves a last
/// pivot near n·eps·max|U_ii|, so the floor grows with the size.
inline double singular_rcond(int n) { return std::max(kSingularRcond, 100.0 * n * std::numeric_limits<double>::epsilon()); }

struct BackwardError {
  double normwise = 0.0;       // ‖Ax−b‖₂ / (‖A‖_F‖x‖₂ + ‖b‖₂)
  double componentwise = 0.0;  // max_i |Ax−b|_i / (|A||x| + |b|)_i
};

BackwardError backward_error(const SparseMatrix& a, const Vector& x, const Vector& b);

/// Factorize-once solver for A x + m λ = b, m^T x = 0 (A with constant null space).
class MeanConstrainedSolver {
public:
  MeanConstrainedSolver(const SparseMatrix& a, const Vector& weights);

  /// Returns x; the Lagrange multiplier λ (mean defect of b absorbed) is optional output.
  Vector solve(const Vector& b, double* multiplier = nullptr) const;
  int size() const { return n_; }

private:
  int n_;
  SparseLU lu_;
};

/// 3x3 block system over one field space, flattened in block order, with an
/// optional zero-mean constraint on the last block.
struct BlockSystem {
  int block_size = 0;
  std::array<SparseMatrix, 9> blocks;  // row-major; empty (0x0) means zero
  std::array<Vector, 3> rhs;
  std::optional<Vector> mean_weights;

  SparseMatrix& block(int r, int c) { return blocks[r * 3 + c]; }
  const SparseMatrix& block(int r, int c) const { return blocks[r * 3 + c]; }
  SparseMatrix flatten() const;
};

std::array<Vector, 3> solve_block_system(const BlockSystem& system);

/// Fixed-pattern 3x3 block matrix whose blocks all share one Q1 pattern, plus
/// zero-mean borders on selected blocks (each adds a multiplier column and a
/// constraint row). Blocks are refilled and the matrix refactorized every
/// stage while the symbolic analysis is reused.
/// Where each logical block row lands in a flattened stage matrix and the
/// factor it is multiplied by. Neither changes the solution, only the pivot search.
struct BlockRowLayout {
  std::array<int, 3> position{0, 1, 2};
  std::array<double, 3> scale{1.0, 1.0, 1.0};
};

class BlockStageSolver {
public:
  using RowLayout = BlockRowLayout;

  BlockStageSolver(const SparseMatrix& block_pattern, const Vector& mean_weights,
                   std::vector<int> constrained_blocks = {2}, RowLayout layout = RowLayout());

  void clear();
  /// Adds scale * m into block (r, c); m must carry the shared block pattern.
  void add(int r, int c, double scale, const SparseMatrix& m);
  void factorize();

  struct Solution {
    std::array<Vector, 3> blocks;
    std::vector<double> multipliers;  // one per constrained block
    double residual = 0.0;      // ‖Ax−b‖₂ / (‖A‖_F‖x‖₂ + ‖b‖₂)
    double row_residual = 0.0;  // max_i |Ax−b|_i / (|A||x| + |b|)_i
  };
  /// rhs holds the three blocks; border equations have zero right-hand side.
  Solution solve(const std::array<Vector, 3>& rhs) const;

  int block_size() const { return n_; }
  const SparseMatrix& matrix() const { return matrix_; }
  const SparseLU& lu() const { return lu_; }

private:
  int n_;
  SparseMatrix pattern_;
  SparseMatrix matrix_;
  std::vector<int> constrained_;
  RowLayout layout_;
  std::vector<int> block_offset_;  // per big column < 3n: start of its block(0, c) run
  SparseLU lu_;
};

}  // namespace pnp
