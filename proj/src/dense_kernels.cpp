// Column-major BLAS entry points used by UMFPACK, served by Eigen. Defining
// them here overrides whatever libblas the system resolves, so the sparse LU
// never reaches the OpenBLAS kernels that are wrong on some AVX-512 parts.

#include <Eigen/Dense>
#include <cctype>

#include "pnp/linalg.hpp"

namespace {

using Eigen::Dynamic;
using Eigen::InnerStride;
using Eigen::OuterStride;
using Mat = Eigen::Map<Eigen::MatrixXd, 0, OuterStride<>>;
using CMat = Eigen::Map<const Eigen::MatrixXd, 0, OuterStride<>>;
using Vec = Eigen::Map<Eigen::VectorXd, 0, InnerStride<>>;
using CVec = Eigen::Map<const Eigen::VectorXd, 0, InnerStride<>>;

bool flag(const char* c, char x) { return std::toupper(static_cast<unsigned char>(*c)) == x; }

// BLAS walks a negative increment from the far end.
template <class T>
T* first(T* p, int n, int inc) {
  return inc < 0 ? p + static_cast<std::ptrdiff_t>(n - 1) * -inc : p;
}

Vec vec(double* p, int n, int inc) { return Vec(first(p, n, inc), n, InnerStride<>(inc)); }
CVec cvec(const double* p, int n, int inc) { return CVec(first(p, n, inc), n, InnerStride<>(inc)); }

void scale(Mat& c, double beta) {
  if (beta == 0.0) {
    c.setZero();  // must not propagate NaN from uninitialised output
  } else if (beta != 1.0) {
    c *= beta;
  }
}

template <class Tri, class B>
void tri_solve(const Tri& t, B& b, bool left) {
  if (left) {
    t.solveInPlace(b);
  } else {
    t.template solveInPlace<Eigen::OnTheRight>(b);
  }
}

template <class A, class B>
void tri_dispatch(const A& a, B& b, bool left, bool lower, bool unit) {
  if (lower) {
    if (unit) tri_solve(a.template triangularView<Eigen::UnitLower>(), b, left);
    else tri_solve(a.template triangularView<Eigen::Lower>(), b, left);
  } else {
    if (unit) tri_solve(a.template triangularView<Eigen::UnitUpper>(), b, left);
    else tri_solve(a.template triangularView<Eigen::Upper>(), b, left);
  }
}

}  // namespace

extern "C" {

void dgemm_(const char* transa, const char* transb, const int* m, const int* n, const int* k,
            const double* alpha, const double* a, const int* lda, const double* b, const int* ldb,
            const double* beta, double* c, const int* ldc) {
  if (*m == 0 || *n == 0) return;
  Mat C(c, *m, *n, OuterStride<>(*ldc));
  scale(C, *beta);
  if (*alpha == 0.0 || *k == 0) return;
  const bool ta = !flag(transa, 'N');
  const bool tb = !flag(transb, 'N');
  CMat A(a, ta ? *k : *m, ta ? *m : *k, OuterStride<>(*lda));
  CMat B(b, tb ? *n : *k, tb ? *k : *n, OuterStride<>(*ldb));
  if (!ta && !tb) C.noalias() += *alpha * A * B;
  else if (ta && !tb) C.noalias() += *alpha * A.transpose() * B;
  else if (!ta) C.noalias() += *alpha * A * B.transpose();
  else C.noalias() += *alpha * A.transpose() * B.transpose();
}

void dgemv_(const char* trans, const int* m, const int* n, const double* alpha, const double* a,
            const int* lda, const double* x, const int* incx, const double* beta, double* y,
            const int* incy) {
  const bool t = !flag(trans, 'N');
  const int lx = t ? *m : *n;
  const int ly = t ? *n : *m;
  if (ly == 0) return;
  Vec Y = vec(y, ly, *incy);
  if (*beta == 0.0) Y.setZero();
  else if (*beta != 1.0) Y *= *beta;
  if (*alpha == 0.0 || lx == 0) return;
  CMat A(a, *m, *n, OuterStride<>(*lda));
  const CVec X = cvec(x, lx, *incx);
  if (t) Y.noalias() += *alpha * (A.transpose() * X);
  else Y.noalias() += *alpha * (A * X);
}

void dger_(const int* m, const int* n, const double* alpha, const double* x, const int* incx,
           const double* y, const int* incy, double* a, const int* lda) {
  if (*m == 0 || *n == 0 || *alpha == 0.0) return;
  Mat A(a, *m, *n, OuterStride<>(*lda));
  A.noalias() += *alpha * cvec(x, *m, *incx) * cvec(y, *n, *incy).transpose();
}

void dtrsm_(const char* side, const char* uplo, const char* transa, const char* diag, const int* m,
            const int* n, const double* alpha, const double* a, const int* lda, double* b,
            const int* ldb) {
  if (*m == 0 || *n == 0) return;
  Mat B(b, *m, *n, OuterStride<>(*ldb));
  scale(B, *alpha);
  if (*alpha == 0.0) return;
  const bool left = flag(side, 'L');
  const bool lower = flag(uplo, 'L');
  const bool unit = flag(diag, 'U');
  const int k = left ? *m : *n;
  CMat A(a, k, k, OuterStride<>(*lda));
  if (flag(transa, 'N')) tri_dispatch(A, B, left, lower, unit);
  else tri_dispatch(A.transpose(), B, left, !lower, unit);
}

void dtrsv_(const char* uplo, const char* trans, const char* diag, const int* n, const double* a,
            const int* lda, double* x, const int* incx) {
  if (*n == 0) return;
  CMat A(a, *n, *n, OuterStride<>(*lda));
  Vec X = vec(x, *n, *incx);
  Eigen::VectorXd v = X;
  const bool lower = flag(uplo, 'L');
  const bool unit = flag(diag, 'U');
  if (flag(trans, 'N')) tri_dispatch(A, v, true, lower, unit);
  else tri_dispatch(A.transpose(), v, true, !lower, unit);
  X = v;
}

}  // extern "C"

namespace pnp {

const char* dense_kernel_backend() { return "eigen"; }

}  // namespace pnp
