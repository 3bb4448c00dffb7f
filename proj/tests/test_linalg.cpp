#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "pnp/errors.hpp"
#include "pnp/linalg.hpp"

using namespace pnp;
using Eigen::MatrixXd;

extern "C" {
void dgemm_(const char*, const char*, const int*, const int*, const int*, const double*, const double*, const int*,
            const double*, const int*, const double*, double*, const int*);
void dgemv_(const char*, const int*, const int*, const double*, const double*, const int*, const double*,
            const int*, const double*, double*, const int*);
void dger_(const int*, const int*, const double*, const double*, const int*, const double*, const int*, double*,
           const int*);
void dtrsm_(const char*, const char*, const char*, const char*, const int*, const int*, const double*,
            const double*, const int*, double*, const int*);
void dtrsv_(const char*, const char*, const char*, const int*, const double*, const int*, double*, const int*);
}

namespace {

std::vector<double> filled(int n, double seed) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = std::sin(seed * (i + 1.3)) + 0.1 * (i % 5);
  return v;
}

// column-major element (i, j) with leading dimension ld
double& at(std::vector<double>& a, int ld, int i, int j) { return a[i + j * ld]; }

// logical element k of a strided BLAS vector of length n
int idx(int k, int n, int inc) { return inc > 0 ? k * inc : (n - 1 - k) * (-inc); }

SparseMatrix neumann_1d(int n) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i + 1 < n; ++i) {
    const double k = 1.0 + 0.25 * i;
    t.emplace_back(i, i, k);
    t.emplace_back(i + 1, i + 1, k);
    t.emplace_back(i, i + 1, -k);
    t.emplace_back(i + 1, i, -k);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

}  // namespace

TEST_SUITE("dense_kernels") {
  TEST_CASE("dgemm matches naive loops for every transpose combination") {
    const int m = 5, n = 4, k = 3, lda = 7, ldb = 6, ldc = 8;
    for (char ta : {'N', 'T'}) {
      for (char tb : {'N', 'T'}) {
        auto a = filled(lda * 7, 0.3), b = filled(ldb * 7, 0.9), c = filled(ldc * n, 1.7);
        auto expect = c;
        const double alpha = 1.5, beta = -0.5;
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) {
              const double av = ta == 'N' ? at(a, lda, i, p) : at(a, lda, p, i);
              const double bv = tb == 'N' ? at(b, ldb, p, j) : at(b, ldb, j, p);
              s += av * bv;
            }
            at(expect, ldc, i, j) = alpha * s + beta * at(c, ldc, i, j);
          }
        }
        dgemm_(&ta, &tb, &m, &n, &k, &alpha, a.data(), &lda, b.data(), &ldb, &beta, c.data(), &ldc);
        for (std::size_t q = 0; q < c.size(); ++q) CHECK(c[q] == doctest::Approx(expect[q]).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("dgemm with beta = 0 ignores NaN in C") {
    const int m = 2, n = 2, k = 2, ld = 2;
    std::vector<double> a{1, 2, 3, 4}, b{1, 0, 0, 1}, c(4, std::nan(""));
    const double alpha = 1.0, beta = 0.0;
    const char t = 'N';
    dgemm_(&t, &t, &m, &n, &k, &alpha, a.data(), &ld, b.data(), &ld, &beta, c.data(), &ld);
    CHECK(c == a);
  }

  TEST_CASE("dgemv and dger honour negative increments") {
    const int m = 4, n = 3, lda = 5;
    for (char tr : {'N', 'T'}) {
      for (int incx : {1, 2, -1, -2}) {
        for (int incy : {1, -3}) {
          const int lx = tr == 'N' ? n : m, ly = tr == 'N' ? m : n;
          auto a = filled(lda * n, 0.41), x = filled(lx * 3, 1.2), y = filled(ly * 3, 2.3);
          auto expect = y;
          const double alpha = 0.7, beta = 1.3;
          for (int i = 0; i < ly; ++i) {
            double s = 0.0;
            for (int j = 0; j < lx; ++j) {
              s += (tr == 'N' ? at(a, lda, i, j) : at(a, lda, j, i)) * x[idx(j, lx, incx)];
            }
            expect[idx(i, ly, incy)] = alpha * s + beta * y[idx(i, ly, incy)];
          }
          dgemv_(&tr, &m, &n, &alpha, a.data(), &lda, x.data(), &incx, &beta, y.data(), &incy);
          for (std::size_t q = 0; q < y.size(); ++q) CHECK(y[q] == doctest::Approx(expect[q]).epsilon(1e-14));
        }
      }
    }
    for (int incx : {1, -2}) {
      auto a = filled(lda * n, 0.8), x = filled(m * 2, 0.5), y = filled(n * 2, 0.6);
      auto expect = a;
      const double alpha = -1.1;
      const int incy = -1;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) at(expect, lda, i, j) += alpha * x[idx(i, m, incx)] * y[idx(j, n, incy)];
      dger_(&m, &n, &alpha, x.data(), &incx, y.data(), &incy, a.data(), &lda);
      for (std::size_t q = 0; q < a.size(); ++q) CHECK(a[q] == doctest::Approx(expect[q]).epsilon(1e-14));
    }
  }

  TEST_CASE("triangular solves invert the triangular product") {
    const int n = 4, ld = 6, nrhs = 3;
    auto a = filled(ld * n, 0.77);
    for (int i = 0; i < n; ++i) at(a, ld, i, i) = 3.0 + i;
    for (char uplo : {'U', 'L'}) {
      for (char trans : {'N', 'T'}) {
        for (char diag : {'N', 'U'}) {
          MatrixXd t = MatrixXd::Zero(n, n);
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              const bool keep = uplo == 'U' ? j >= i : j <= i;
              if (keep) t(i, j) = i == j && diag == 'U' ? 1.0 : at(a, ld, i, j);
            }
          }
          const MatrixXd op = trans == 'N' ? t : MatrixXd(t.transpose());
          // left side: op(A) X = alpha B
          const MatrixXd x_true = MatrixXd::NullaryExpr(n, nrhs, [](Eigen::Index i, Eigen::Index j) {
            return std::cos(1.0 + i + 2.0 * j);
          });
          const double alpha = 2.0;
          const MatrixXd rhs = op * x_true / alpha;
          std::vector<double> b(ld * nrhs, 0.0);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < nrhs; ++j) at(b, ld, i, j) = rhs(i, j);
          const char side = 'L';
          dtrsm_(&side, &uplo, &trans, &diag, &n, &nrhs, &alpha, a.data(), &ld, b.data(), &ld);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < nrhs; ++j) CHECK(at(b, ld, i, j) == doctest::Approx(x_true(i, j)).epsilon(1e-12));

          // right side: X op(A) = alpha B
          const MatrixXd y_true = MatrixXd::NullaryExpr(nrhs, n, [](Eigen::Index i, Eigen::Index j) {
            return std::sin(0.5 + i - j);
          });
          const MatrixXd rrhs = y_true * op / alpha;
          std::vector<double> c(ld * n, 0.0);
          for (int i = 0; i < nrhs; ++i)
            for (int j = 0; j < n; ++j) at(c, ld, i, j) = rrhs(i, j);
          const char right = 'R';
          dtrsm_(&right, &uplo, &trans, &diag, &nrhs, &n, &alpha, a.data(), &ld, c.data(), &ld);
          for (int i = 0; i < nrhs; ++i)
            for (int j = 0; j < n; ++j) CHECK(at(c, ld, i, j) == doctest::Approx(y_true(i, j)).epsilon(1e-12));

          for (int inc : {1, -2}) {
            const Eigen::VectorXd v_true = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
            const Eigen::VectorXd r = op * v_true;
            std::vector<double> xv(n * 2, 0.0);
            for (int i = 0; i < n; ++i) xv[idx(i, n, inc)] = r[i];
            dtrsv_(&uplo, &trans, &diag, &n, a.data(), &ld, xv.data(), &inc);
            for (int i = 0; i < n; ++i) CHECK(xv[idx(i, n, inc)] == doctest::Approx(v_true[i]).epsilon(1e-12));
          }
        }
      }
    }
  }

  TEST_CASE("backend names") {
    CHECK(std::string(dense_kernel_backend()) == "eigen");
    CHECK(SparseLU::backend().find("umfpack") != std::string::npos);
  }
}

TEST_SUITE("linalg") {
  TEST_CASE("sparse LU solves and reports singularity") {
    const auto ops = testing::holed_ops(12);
    const SparseMatrix a = ops->mass.matrix + ops->stiffness.matrix;
    const Vector x_true = Vector::LinSpaced(a.rows(), -1.0, 1.0);
    const Vector b = a * x_true;
    SparseLU lu;
    lu.factorize(a);
    const Vector x = lu.solve(b);
    CHECK((x - x_true).cwiseAbs().maxCoeff() < 1e-11);
    CHECK(lu.rcond() > 0.0);
    // refactorizing the same pattern reuses the analysis
    lu.factorize(2.0 * a);
    CHECK((lu.solve(b) - 0.5 * x_true).cwiseAbs().maxCoeff() < 1e-11);

    SparseMatrix bad = a;
    bad.coeffRef(0, 0) = std::nan("");
    CHECK_THROWS_AS(lu.factorize(bad), DataError);
    CHECK_THROWS_AS(solve_sparse(ops->stiffness.matrix, b), SingularMatrixError);
  }

  TEST_CASE("backward error of an exact and a perturbed solution") {
    const auto ops = testing::square_ops(6);
    const SparseMatrix& a = ops->mass.matrix;
    const Vector x = Vector::Ones(a.rows());
    const Vector b = a * x;
    const BackwardError exact = backward_error(a, x, b);
    CHECK(exact.normwise < 1e-15);
    CHECK(exact.componentwise < 1e-15);
    Vector y = x;
    y[3] += 1e-6;
    const BackwardError off = backward_error(a, y, b);
    CHECK(off.normwise > 1e-9);
    CHECK(off.componentwise > off.normwise);
  }

  TEST_CASE("bordered Neumann solve matches the pseudoinverse oracle") {
    const int n = 8;
    const SparseMatrix a = neumann_1d(n);
    Vector m(n);
    for (int i = 0; i < n; ++i) m[i] = 0.5 + 0.1 * i;
    Vector b(n);
    for (int i = 0; i < n; ++i) b[i] = std::cos(0.9 * i) + 0.2;

    double lambda = 0.0;
    const Vector x_ref = oracle::bordered_solve(MatrixXd(a), b, m, &lambda);

    const MeanConstrainedSolver solver(a, m);
    double mult = 0.0;
    const Vector x = solver.solve(b, &mult);
    CHECK((x - x_ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(mult == doctest::Approx(lambda).epsilon(1e-10));
    CHECK(std::abs(m.dot(x)) < 1e-12);

    SolveOptions opts;
    opts.mean_weights = m;
    CHECK((solve_sparse(a, b, opts) - x_ref).cwiseAbs().maxCoeff() < 1e-10);

    const BorderedSystem bs = apply_mean_constraint(a, b, m);
    CHECK(bs.matrix.rows() == n + 1);
    CHECK(bs.rhs[n] == 0.0);
  }

  TEST_CASE("bordered Poisson solve on an 8x8 grid matches the pseudoinverse oracle") {
    const auto ops = testing::square_ops(8);
    const int n = ops->n_active();
    const Vector m = ops->lumped;
    const Vector b = oracle::sample(n, 1.3);
    double lambda = 0.0;
    const Vector x_ref = oracle::bordered_solve(testing::dense(ops->stiffness.matrix), b, m, &lambda);
    const MeanConstrainedSolver solver(ops->stiffness.matrix, m);
    double mult = 0.0;
    const Vector x = solver.solve(b, &mult);
    CHECK((x - x_ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(mult == doctest::Approx(lambda).epsilon(1e-10));
  }

  TEST_CASE("manufactured Neumann Poisson problem converges at second order") {
    std::vector<double> errors;
    for (int cells : {8, 16, 32}) {
      const auto ops = testing::square_ops(cells);
      const int n = ops->n_active();
      Vector u(n), f(n);
      for (int i = 0; i < n; ++i) {
        const Point p = ops->dof_points[i];
        u[i] = std::cos(std::numbers::pi * p.x) * std::cos(std::numbers::pi * p.y);
        f[i] = 2.0 * std::numbers::pi * std::numbers::pi * u[i];
      }
      const MeanConstrainedSolver solver(ops->stiffness.matrix, ops->lumped);
      const Vector uh = solver.solve(ops->mass.matrix * f);
      const Vector e = uh - (u.array() - ops->lumped.dot(u) / ops->area()).matrix();
      errors.push_back(l2_norm(e, ops->mass.matrix));
    }
    CHECK(errors[2] < 5e-3);
    CHECK(std::log2(errors[0] / errors[1]) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(std::log2(errors[1] / errors[2]) == doctest::Approx(2.0).epsilon(0.1));
  }

  TEST_CASE("block stage solver agrees with a dense solve for any row layout") {
    const auto ops = testing::holed_ops(10);
    const int n = ops->n_active();
    const SparseMatrix& mm = ops->mass.matrix;
    const SparseMatrix& ll = ops->stiffness.matrix;
    const Vector w = ops->lumped;
    std::array<Vector, 3> rhs{Vector::LinSpaced(n, 0.0, 1.0), Vector::LinSpaced(n, 1.0, -1.0),
                              Vector::LinSpaced(n, -0.5, 0.5)};

    // [M+L, 0, 0.3L; 0, M+2L, -0.2L; M, -M, L] with a zero-mean border on block 2
    auto fill = [&](BlockStageSolver& s) {
      s.clear();
      s.add(0, 0, 1.0, mm);
      s.add(0, 0, 1.0, ll);
      s.add(0, 2, 0.3, ll);
      s.add(1, 1, 1.0, mm);
      s.add(1, 1, 2.0, ll);
      s.add(1, 2, -0.2, ll);
      s.add(2, 0, 1.0, mm);
      s.add(2, 1, -1.0, mm);
      s.add(2, 2, 1.0, ll);
      s.factorize();
    };

    // dense reference with the same border
    MatrixXd big = MatrixXd::Zero(3 * n + 1, 3 * n + 1);
    const MatrixXd dm = MatrixXd(mm), dl = MatrixXd(ll);
    big.block(0, 0, n, n) = dm + dl;
    big.block(0, 2 * n, n, n) = 0.3 * dl;
    big.block(n, n, n, n) = dm + 2.0 * dl;
    big.block(n, 2 * n, n, n) = -0.2 * dl;
    big.block(2 * n, 0, n, n) = dm;
    big.block(2 * n, n, n, n) = -dm;
    big.block(2 * n, 2 * n, n, n) = dl;
    big.block(2 * n, 3 * n, n, 1) = w;
    big.block(3 * n, 2 * n, 1, n) = w.transpose();
    Vector b(3 * n + 1);
    b << rhs[0], rhs[1], rhs[2], 0.0;
    const Vector ref = big.fullPivLu().solve(b);

    for (const BlockRowLayout layout :
         {BlockRowLayout{}, BlockRowLayout{{0, 2, 1}, {1.0, 1.0, 1.0}}, BlockRowLayout{{2, 0, 1}, {2.0, -1.0, 1e3}}}) {
      BlockStageSolver solver(ops->assembler->pattern(), w, {2}, layout);
      fill(solver);
      const auto sol = solver.solve(rhs);
      for (int k = 0; k < 3; ++k) CHECK((sol.blocks[k] - ref.segment(k * n, n)).cwiseAbs().maxCoeff() < 1e-10);
      REQUIRE(sol.multipliers.size() == 1);
      CHECK(sol.multipliers[0] == doctest::Approx(ref[3 * n]).epsilon(1e-9));
      CHECK(sol.residual < 1e-14);
      CHECK(sol.row_residual < 1e-12);
    }
    CHECK_THROWS(BlockStageSolver(ops->assembler->pattern(), w, {2}, BlockRowLayout{{0, 0, 1}, {1, 1, 1}}));
    CHECK_THROWS(BlockStageSolver(ops->assembler->pattern(), w, {2}, BlockRowLayout{{0, 1, 2}, {1, 0, 1}}));
  }
}
