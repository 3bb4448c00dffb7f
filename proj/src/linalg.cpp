#include "pnp/linalg.hpp"

#include <suitesparse/umfpack.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

bool same_pattern(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
  return std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.cols() + 1, b.outerIndexPtr()) &&
         std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr());
}

void check_finite(const SparseMatrix& a) {
  const double* v = a.valuePtr();
  if (!std::all_of(v, v + a.nonZeros(), [](double x) { return std::isfinite(x); })) {
    throw DataError("matrix has non-finite entries");
  }
}

}  // namespace

SparseLU::SparseLU() = default;

SparseLU::~SparseLU() {
  release_numeric();
  release_symbolic();
}

SparseLU::SparseLU(SparseLU&& other) noexcept
    : symbolic_(other.symbolic_),
      numeric_(other.numeric_),
      matrix_(std::move(other.matrix_)),
      rows_(other.rows_),
      rcond_(other.rcond_),
      factorize_seconds_(other.factorize_seconds_),
      sym_pivot_tolerance_(other.sym_pivot_tolerance_) {
  other.symbolic_ = nullptr;
  other.numeric_ = nullptr;
}

SparseLU& SparseLU::operator=(SparseLU&& other) noexcept {
  if (this != &other) {
    release_numeric();
    release_symbolic();
    symbolic_ = std::exchange(other.symbolic_, nullptr);
    numeric_ = std::exchange(other.numeric_, nullptr);
    matrix_ = std::move(other.matrix_);
    rows_ = other.rows_;
    rcond_ = other.rcond_;
    factorize_seconds_ = other.factorize_seconds_;
    sym_pivot_tolerance_ = other.sym_pivot_tolerance_;
  }
  return *this;
}

void SparseLU::release_numeric() {
  if (numeric_) umfpack_di_free_numeric(&numeric_);
  numeric_ = nullptr;
}

void SparseLU::release_symbolic() {
  if (symbolic_) umfpack_di_free_symbolic(&symbolic_);
  symbolic_ = nullptr;
}

void SparseLU::factorize(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw DataError("cannot factorize a non-square matrix");
  if (!a.isCompressed()) throw DataError("matrix must be in compressed form");
  check_finite(a);
  const auto start = std::chrono::steady_clock::now();

  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  control[UMFPACK_SYM_PIVOT_TOLERANCE] = sym_pivot_tolerance_;

  const bool reuse = symbolic_ != nullptr && same_pattern(a, matrix_);
  matrix_ = a;
  rows_ = static_cast<int>(a.rows());
  release_numeric();
  if (!reuse) {
    release_symbolic();
    const int status = umfpack_di_symbolic(rows_, rows_, matrix_.outerIndexPtr(),
                                           matrix_.innerIndexPtr(), matrix_.valuePtr(),
                                           &symbolic_, control, info);
    if (status != UMFPACK_OK) {
      throw SingularMatrixError("symbolic factorization failed (UMFPACK status " +
                                std::to_string(status) + ")");
    }
  }
  const int status = umfpack_di_numeric(matrix_.outerIndexPtr(), matrix_.innerIndexPtr(),
                                        matrix_.valuePtr(), symbolic_, &numeric_, control, info);
  rcond_ = info[UMFPACK_RCOND];
  factorize_seconds_ =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (status == UMFPACK_WARNING_singular_matrix) {
    release_numeric();
    throw SingularMatrixError("matrix is structurally or numerically singular (zero pivot)");
  }
  if (status != UMFPACK_OK) {
    release_numeric();
    throw SingularMatrixError("numeric factorization failed (UMFPACK status " +
                              std::to_string(status) + ")");
  }
}

std::string SparseLU::backend() { return std::string("umfpack+") + dense_kernel_backend(); }

Vector SparseLU::solve(const Vector& b) const {
  if (!numeric_) throw DataError("solve called before a successful factorization");
  if (b.size() != rows_) throw DataError("right-hand side length does not match the matrix");
  if (!b.allFinite()) throw DataError("right-hand side has non-finite entries");
  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  Vector x(rows_);
  const int status = umfpack_di_solve(UMFPACK_A, matrix_.outerIndexPtr(), matrix_.innerIndexPtr(),
                                      matrix_.valuePtr(), x.data(), b.data(), numeric_, control,
                                      info);
  if (status != UMFPACK_OK) {
    throw SingularMatrixError("triangular solve failed (UMFPACK status " + std::to_string(status) +
                              ")");
  }
  return x;
}

BorderedSystem apply_mean_constraint(const SparseMatrix& a, const Vector& b,
                                     const Vector& weights) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n || weights.size() != n) {
    throw DataError("mean constraint: dimension mismatch");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(a.nonZeros() + 2 * n);
  for (int col = 0; col < a.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
      triplets.emplace_back(static_cast<int>(it.row()), col, it.value());
    }
  }
  for (int i = 0; i < n; ++i) {
    triplets.emplace_back(i, static_cast<int>(n), weights[i]);
    triplets.emplace_back(static_cast<int>(n), i, weights[i]);
  }
  BorderedSystem sys;
  sys.matrix.resize(n + 1, n + 1);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  sys.rhs = Vector::Zero(n + 1);
  sys.rhs.head(n) = b;
  return sys;
}

Vector solve_sparse(const SparseMatrix& a, const Vector& b, const SolveOptions& options) {
  if (options.mean_weights) {
    const BorderedSystem sys = apply_mean_constraint(a, b, *options.mean_weights);
    SparseLU lu;
    lu.factorize(sys.matrix);
    return lu.solve(sys.rhs).head(a.rows());
  }
  SparseMatrix compressed = a;
  compressed.makeCompressed();
  SparseLU lu;
  lu.factorize(compressed);
  if (lu.rcond() < singular_rcond(lu.rows())) {
    throw SingularMatrixError("matrix is numerically singular (rcond " +
                              std::to_string(lu.rcond()) + "); set a mean constraint");
  }
  return lu.solve(b);
}

MeanConstrainedSolver::MeanConstrainedSolver(const SparseMatrix& a, const Vector& weights)
    : n_(static_cast<int>(a.rows())) {
  const BorderedSystem sys = apply_mean_constraint(a, Vector::Zero(n_), weights);
  lu_.factorize(sys.matrix);
}

Vector MeanConstrainedSolver::solve(const Vector& b, double* multiplier) const {
  if (b.size() != n_) throw DataError("mean-constrained solve: dimension mismatch");
  Vector rhs = Vector::Zero(n_ + 1);
  rhs.head(n_) = b;
  const Vector x = lu_.solve(rhs);
  if (multiplier) *multiplier = x[n_];
  return x.head(n_);
}

BackwardError backward_error(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const Vector r = a * x - b;
  BackwardError e;
  const double denom = a.norm() * x.norm() + b.norm();
  e.normwise = denom > 0.0 ? r.norm() / denom : 0.0;
  const Vector scale = a.cwiseAbs() * x.cwiseAbs() + b.cwiseAbs();
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (scale[i] > 0.0) e.componentwise = std::max(e.componentwise, std::abs(r[i]) / scale[i]);
  }
  return e;
}

SparseMatrix BlockSystem::flatten() const {
  const int n = block_size;
  const int extra = mean_weights ? 1 : 0;
  std::vector<Eigen::Triplet<double>> triplets;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const SparseMatrix& blk = block(r, c);
      if (blk.size() == 0) continue;
      if (blk.rows() != n || blk.cols() != n) throw DataError("block dimensions are inconsistent");
      for (int col = 0; col < blk.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(blk, col); it; ++it) {
          triplets.emplace_back(r * n + static_cast<int>(it.row()), c * n + col, it.value());
        }
      }
    }
  }
  if (mean_weights) {
    if (mean_weights->size() != n) throw DataError("mean weights have the wrong length");
    for (int i = 0; i < n; ++i) {
      triplets.emplace_back(2 * n + i, 3 * n, (*mean_weights)[i]);
      triplets.emplace_back(3 * n, 2 * n + i, (*mean_weights)[i]);
    }
  }
  SparseMatrix out(3 * n + extra, 3 * n + extra);
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

std::array<Vector, 3> solve_block_system(const BlockSystem& system) {
  const int n = system.block_size;
  Vector rhs = Vector::Zero(3 * n + (system.mean_weights ? 1 : 0));
  for (int r = 0; r < 3; ++r) {
    if (system.rhs[r].size() != n) throw DataError("block right-hand side has the wrong length");
    rhs.segment(r * n, n) = system.rhs[r];
  }
  SolveOptions none;
  const Vector x = solve_sparse(system.flatten(), rhs, none);
  return {x.segment(0, n), x.segment(n, n), x.segment(2 * n, n)};
}

BlockStageSolver::BlockStageSolver(const SparseMatrix& block_pattern, const Vector& mean_weights,
                                   std::vector<int> constrained_blocks, RowLayout layout)
    : n_(static_cast<int>(block_pattern.rows())),
      pattern_(block_pattern),
      constrained_(std::move(constrained_blocks)),
      layout_(layout) {
  std::array<int, 3> logical{-1, -1, -1};
  for (int r = 0; r < 3; ++r) {
    const int p = layout_.position[r];
    if (p < 0 || p > 2 || logical[p] >= 0) throw DataError("row layout is not a permutation of the blocks");
    logical[p] = r;
    if (!(std::isfinite(layout_.scale[r]) && layout_.scale[r] != 0.0)) throw DataError("row scale must be finite and nonzero");
  }
  pattern_.makeCompressed();
  if (mean_weights.size() != n_) throw DataError("mean weights have the wrong length");
  std::sort(constrained_.begin(), constrained_.end());
  for (int b : constrained_) {
    if (b < 0 || b > 2) throw DataError("constrained block index out of range");
  }
  const int n = n_;
  const int n_border = static_cast<int>(constrained_.size());
  const int big = 3 * n + n_border;
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();

  const long long nnz = 9LL * pattern_.nonZeros() + 2LL * n * n_border;
  matrix_.resize(big, big);
  matrix_.resizeNonZeros(static_cast<Eigen::Index>(nnz));
  int* big_outer = matrix_.outerIndexPtr();
  int* big_inner = matrix_.innerIndexPtr();
  double* big_values = matrix_.valuePtr();
  block_offset_.resize(3 * n);

  auto border_of = [&](int block) {
    const auto it = std::find(constrained_.begin(), constrained_.end(), block);
    return it == constrained_.end() ? -1 : static_cast<int>(it - constrained_.begin());
  };

  int pos = 0;
  for (int c = 0; c < 3; ++c) {
    const int border = border_of(c);
    for (int col = 0; col < n; ++col) {
      const int big_col = c * n + col;
      big_outer[big_col] = pos;
      block_offset_[big_col] = pos;
      for (int p = 0; p < 3; ++p) {
        for (int k = outer[col]; k < outer[col + 1]; ++k) {
          big_inner[pos] = p * n + inner[k];
          big_values[pos] = 0.0;
          ++pos;
        }
      }
      if (border >= 0) {
        big_inner[pos] = 3 * n + border;
        big_values[pos] = mean_weights[col];
        ++pos;
      }
    }
  }
  for (int k = 0; k < n_border; ++k) {
    big_outer[3 * n + k] = pos;
    for (int i = 0; i < n; ++i) {
      big_inner[pos] = layout_.position[constrained_[k]] * n + i;
      big_values[pos] = layout_.scale[constrained_[k]] * mean_weights[i];
      ++pos;
    }
  }
  big_outer[big] = pos;
}

void BlockStageSolver::clear() {
  const int* outer = pattern_.outerIndexPtr();
  double* values = matrix_.valuePtr();
  for (int c = 0; c < 3; ++c) {
    for (int col = 0; col < n_; ++col) {
      const int count = outer[col + 1] - outer[col];
      std::fill_n(values + block_offset_[c * n_ + col], 3 * count, 0.0);
    }
  }
}

void BlockStageSolver::add(int r, int c, double scale, const SparseMatrix& m) {
  const double w = scale * layout_.scale[r];
  if (!same_pattern(m, pattern_)) {
    throw DataError("stage block does not share the assembler's sparsity pattern");
  }
  const int* outer = pattern_.outerIndexPtr();
  const double* src = m.valuePtr();
  double* values = matrix_.valuePtr();
  for (int col = 0; col < n_; ++col) {
    const int count = outer[col + 1] - outer[col];
    double* dst = values + block_offset_[c * n_ + col] + layout_.position[r] * count;
    const double* s = src + outer[col];
    for (int k = 0; k < count; ++k) dst[k] += w * s[k];
  }
}

void BlockStageSolver::factorize() {
  lu_.set_sym_pivot_tolerance(kStagePivotTolerance);
  lu_.factorize(matrix_);
}

BlockStageSolver::Solution BlockStageSolver::solve(const std::array<Vector, 3>& rhs) const {
  const int n_border = static_cast<int>(constrained_.size());
  Vector b = Vector::Zero(3 * n_ + n_border);
  for (int r = 0; r < 3; ++r) b.segment(layout_.position[r] * n_, n_) = layout_.scale[r] * rhs[r];
  const Vector x = lu_.solve(b);
  Solution sol{{x.segment(0, n_), x.segment(n_, n_), x.segment(2 * n_, n_)}, {}, 0.0, 0.0};
  for (int k = 0; k < n_border; ++k) sol.multipliers.push_back(x[3 * n_ + k]);
  const BackwardError be = backward_error(matrix_, x, b);
  sol.residual = be.normwise;
  sol.row_residual = be.componentwise;
  return sol;
}

}  // namespace pnp
