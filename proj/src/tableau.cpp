#include "pnp/tableau.hpp"

#include <algorithm>
#include <cmath>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

Eigen::MatrixXd rows(int s, std::initializer_list<double> v) {
  Eigen::MatrixXd m(s, s);
  auto it = v.begin();
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) m(i, j) = *it++;
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  int k = 0;
  for (double d : v) x[k++] = d;
  return x;
}

}  // namespace

std::string tableau_name(TableauId id) {
  static const char* names[] = {"I1", "I2", "I3", "I4", "I5", "I6"};
  return names[static_cast<int>(id)];
}

TableauId parse_tableau(const std::string& name) {
  for (TableauId id : kAllTableaux) {
    if (tableau_name(id) == name) return id;
  }
  throw ConfigError("scheme: unknown value '" + name + "' (valid: I1, I2, I3, I4, I5, I6, split)");
}

ButcherTableau tableau(TableauId id) {
  const double g = kGammaI2;
  ButcherTableau t;
  t.id = id;
  switch (id) {
    case TableauId::I1:
      t.label = "IMEX-H(2,2,2)";
      t.s = 2;
      t.a_explicit = rows(2, {0, 0, 1, 0});
      t.a_implicit = rows(2, {0.5, 0, 0, 0.5});
      t.b = vec({0.5, 0.5});
      t.order = 2;
      t.stability = "A-stable implicit part";
      break;
    case TableauId::I2:
      t.label = "IMEX-SA(2,2,2)";
      t.s = 2;
      t.a_explicit = rows(2, {0, 0, 1.0 / (2.0 * g), 0});
      t.a_implicit = rows(2, {g, 0, 1.0 - g, g});
      t.b = vec({1.0 - g, g});
      t.order = 2;
      t.stability = "L-stable, stiffly accurate";
      break;
    case TableauId::I3:
      // The printed first entry of the last implicit row, 1/4 - γ/2, leaves
      // the row sum at 1 - γ; 1/4 + γ/2 restores consistency and second order.
      t.label = "CK(3,3,2)";
      t.s = 3;
      t.a_explicit = rows(3, {0, 0, 0, 2.0 / 3.0, 0, 0, 0.25, 0.75, 0});
      t.a_implicit = rows(3, {0, 0, 0, 2.0 / 3.0 - g, g, 0, 0.25 + 0.5 * g, 0.75 - 1.5 * g, g});
      t.b = vec({0.25 + 0.5 * g, 0.75 - 1.5 * g, g});
      t.order = 2;
      t.type = "II";
      t.globally_stiffly_accurate = true;
      t.stability = "L-stable, GSA, type II";
      break;
    case TableauId::I4:
      t.label = "IMEX-SSP2(3,3,2)";
      t.s = 3;
      t.a_explicit = rows(3, {0, 0, 0, 0.5, 0, 0, 0.5, 0.5, 0});
      t.a_implicit = rows(3, {0.25, 0, 0, 0, 0.25, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3});
      t.b = vec({1.0 / 3, 1.0 / 3, 1.0 / 3});
      t.order = 2;
      t.globally_stiffly_accurate = true;
      t.stability = "GSA, type I";
      break;
    case TableauId::I5: {
      const double alpha = 0.24169426078821;
      const double beta = 0.06042356519705;
      const double eta = 0.12915286960590;
      t.label = "IMEX-SSP3(4,3,3)";
      t.s = 4;
      t.a_explicit = rows(4, {0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0.25, 0.25, 0});
      t.a_implicit = rows(4, {alpha, 0, 0, 0, -alpha, alpha, 0, 0, 0, 1 - alpha, alpha, 0, beta, eta,
                              0.5 - alpha - beta - eta, alpha});
      t.b = vec({0, 1.0 / 6, 1.0 / 6, 2.0 / 3});
      t.order = 3;
      t.stability = "L-stable implicit part, SSP explicit part";
      break;
    }
    case TableauId::I6: {
      const double alpha = 1.208496649176, beta = 0.717933260754, delta = 1.243893189;
      const double eta = -0.644363170684, gamma = 0.435866521508, mu = 0.282066739245;
      const double xi = -0.5259599287, zeta = 0.6304125582, tau = 0.7865807402, theta = -0.4169932983;
      (void)beta;  // abscissa of stage 3, recovered as a row sum
      t.label = "SI-IMEX(4,4,3)";
      t.s = 4;
      t.a_explicit = rows(4, {0, 0, 0, 0, gamma, 0, 0, 0, delta, xi, 0, 0, zeta, tau, theta, 0});
      t.a_implicit = rows(4, {gamma, 0, 0, 0, 0, gamma, 0, 0, 0, mu, gamma, 0, 0, alpha, eta, gamma});
      t.b = vec({0, alpha, eta, gamma});
      t.order = 3;
      t.stability = "L-stable, stiffly accurate";
      break;
    }
  }
  t.stiffly_accurate = (t.a_implicit.row(t.s - 1).transpose() - t.b).cwiseAbs().maxCoeff() == 0.0;
  return t;
}

namespace {

struct Residuals {
  double implicit_side = 0.0;  // conditions on b, A and the implicit abscissae
  double coupling = 0.0;       // conditions involving the explicit tableau
};

Residuals order_residuals(const ButcherTableau& t) {
  const Eigen::VectorXd c = t.c_implicit();
  const Eigen::VectorXd ct = t.c_explicit();
  const auto& a = t.a_implicit;
  const auto& at = t.a_explicit;
  const auto& b = t.b;
  Residuals r;
  auto upd = [](double& slot, double v) { slot = std::max(slot, std::abs(v)); };
  upd(r.implicit_side, b.sum() - 1.0);
  if (t.order >= 2) {
    upd(r.implicit_side, b.dot(c) - 0.5);
    upd(r.coupling, b.dot(ct) - 0.5);
  }
  if (t.order >= 3) {
    upd(r.implicit_side, b.dot(c.cwiseProduct(c)) - 1.0 / 3.0);
    upd(r.implicit_side, b.dot(a * c) - 1.0 / 6.0);
    upd(r.coupling, b.dot(ct.cwiseProduct(ct)) - 1.0 / 3.0);
    upd(r.coupling, b.dot(c.cwiseProduct(ct)) - 1.0 / 3.0);
    upd(r.coupling, b.dot(at * ct) - 1.0 / 6.0);
    upd(r.coupling, b.dot(at * c) - 1.0 / 6.0);
    upd(r.coupling, b.dot(a * ct) - 1.0 / 6.0);
  }
  return r;
}

}  // namespace

double tableau_order_residual(const ButcherTableau& t) {
  const Residuals r = order_residuals(t);
  return std::max(r.implicit_side, r.coupling);
}

void validate_tableau(const ButcherTableau& t, double tol) {
  const std::string who = "tableau " + tableau_name(t.id) + ": ";
  if (t.s < 1 || t.a_explicit.rows() != t.s || t.a_explicit.cols() != t.s || t.a_implicit.rows() != t.s ||
      t.a_implicit.cols() != t.s || t.b.size() != t.s) {
    throw DataError(who + "inconsistent dimensions");
  }
  for (int i = 0; i < t.s; ++i) {
    for (int j = i; j < t.s; ++j) {
      if (t.a_explicit(i, j) != 0.0) throw DataError(who + "explicit part is not strictly lower triangular");
      if (j > i && t.a_implicit(i, j) != 0.0) throw DataError(who + "implicit part is not lower triangular");
    }
  }
  if (!t.a_explicit.allFinite() || !t.a_implicit.allFinite() || !t.b.allFinite()) {
    throw DataError(who + "non-finite coefficient");
  }
  const Residuals r = order_residuals(t);
  if (r.implicit_side > tol) {
    throw DataError(who + "order conditions violated (residual " + std::to_string(r.implicit_side) + ")");
  }
  // The printed explicit constants of I6 carry ten digits, which bounds how
  // well the coupling conditions can hold.
  if (r.coupling > std::max(tol, 1e-9)) {
    throw DataError(who + "coupling order conditions violated (residual " + std::to_string(r.coupling) + ")");
  }
}

}  // namespace pnp
