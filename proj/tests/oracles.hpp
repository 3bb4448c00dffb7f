#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "pnp/fem.hpp"
#include "pnp/linalg.hpp"

// Dense reference computations shared by the unit tests and the acceptance
// runner. Nothing here goes through the library's assembly or solvers.
namespace oracle {

using Eigen::MatrixXd;
using pnp::Vector;

// Global Q1 basis on a uniform n x n grid of the unit square, evaluated
// straight from 1-D hats.
struct Q1Basis {
  int n;
  double h;
  explicit Q1Basis(int cells) : n(cells), h(1.0 / cells) {}

  int nodes() const { return (n + 1) * (n + 1); }
  double hat(int i, double x) const { return std::max(0.0, 1.0 - std::abs(x / h - i)); }
  double dhat(int i, double x) const {
    const double s = x / h - i;
    if (s <= -1.0 || s >= 1.0) return 0.0;
    return s < 0.0 ? 1.0 / h : -1.0 / h;
  }
  double phi(int k, double x, double y) const { return hat(k % (n + 1), x) * hat(k / (n + 1), y); }
  std::array<double, 2> grad(int k, double x, double y) const {
    const int i = k % (n + 1), j = k / (n + 1);
    return {dhat(i, x) * hat(j, y), hat(i, x) * dhat(j, y)};
  }
  double field(const Vector& u, double x, double y) const {
    double s = 0.0;
    for (int k = 0; k < nodes(); ++k) s += u[k] * phi(k, x, y);
    return s;
  }
  std::array<double, 2> field_grad(const Vector& u, double x, double y) const {
    std::array<double, 2> s{0.0, 0.0};
    for (int k = 0; k < nodes(); ++k) {
      const auto g = grad(k, x, y);
      s[0] += u[k] * g[0];
      s[1] += u[k] * g[1];
    }
    return s;
  }

  // 3x3 Gauss per cell, exact for every Q1 product used here.
  template <class F>
  MatrixXd integrate(F&& integrand) const {
    const double g[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    const double w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    MatrixXd out = MatrixXd::Zero(nodes(), nodes());
    for (int cj = 0; cj < n; ++cj) {
      for (int ci = 0; ci < n; ++ci) {
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            const double x = (ci + 0.5 + 0.5 * g[a]) * h;
            const double y = (cj + 0.5 + 0.5 * g[b]) * h;
            integrand(x, y, w[a] * w[b] * h * h / 4.0, out);
          }
        }
      }
    }
    return out;
  }

  MatrixXd mass() const {
    return integrate([&](double x, double y, double w, MatrixXd& out) {
      for (int i = 0; i < nodes(); ++i)
        for (int j = 0; j < nodes(); ++j) out(i, j) += w * phi(i, x, y) * phi(j, x, y);
    });
  }

  MatrixXd stiffness() const {
    return integrate([&](double x, double y, double w, MatrixXd& out) {
      for (int i = 0; i < nodes(); ++i) {
        const auto gi = grad(i, x, y);
        for (int j = 0; j < nodes(); ++j) {
          const auto gj = grad(j, x, y);
          out(i, j) += w * (gi[0] * gj[0] + gi[1] * gj[1]);
        }
      }
    });
  }

  // (w grad u_j, grad v_i)
  MatrixXd drift_h(const Vector& w) const {
    return integrate([&](double x, double y, double q, MatrixXd& out) {
      const double wv = field(w, x, y);
      for (int i = 0; i < nodes(); ++i) {
        const auto gi = grad(i, x, y);
        for (int j = 0; j < nodes(); ++j) {
          const auto gj = grad(j, x, y);
          out(i, j) += q * wv * (gi[0] * gj[0] + gi[1] * gj[1]);
        }
      }
    });
  }

  // (u_j grad w, grad v_i)
  MatrixXd drift_g(const Vector& w) const {
    return integrate([&](double x, double y, double q, MatrixXd& out) {
      const auto gw = field_grad(w, x, y);
      for (int i = 0; i < nodes(); ++i) {
        const auto gi = grad(i, x, y);
        for (int j = 0; j < nodes(); ++j) out(i, j) += q * phi(j, x, y) * (gw[0] * gi[0] + gw[1] * gi[1]);
      }
    });
  }
};

inline Vector sample(int n, double seed) {
  Vector v(n);
  for (int k = 0; k < n; ++k) v[k] = std::sin(seed * (k + 1)) + 0.3 * std::cos(2.1 * k);
  return v;
}

// x with A x + m λ = b and m^T x = 0 for symmetric A whose null space is the
// constants: drop the part of b along m that 1 detects, apply A^+, then
// shift along the constants.
inline Vector bordered_solve(const MatrixXd& a, const Vector& b, const Vector& m, double* lambda = nullptr) {
  const Vector ones = Vector::Ones(a.rows());
  const double l = ones.dot(b) / ones.dot(m);
  const MatrixXd pinv = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(a).pseudoInverse();
  Vector x = pinv * (b - l * m);
  x -= (m.dot(x) / m.dot(ones)) * ones;
  if (lambda) *lambda = l;
  return x;
}

inline double max_abs_diff(const MatrixXd& a, const MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace oracle
