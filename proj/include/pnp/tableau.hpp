#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>

namespace pnp {

enum class TableauId { I1, I2, I3, I4, I5, I6 };

inline constexpr std::array<TableauId, 6> kAllTableaux{TableauId::I1, TableauId::I2, TableauId::I3,
                                                        TableauId::I4, TableauId::I5, TableauId::I6};

std::string tableau_name(TableauId id);
TableauId parse_tableau(const std::string& name);  // throws ConfigError listing valid ids

/// Explicit/implicit pair sharing the weights b.
struct ButcherTableau {
  TableauId id = TableauId::I1;
  std::string label;  // e.g. "IMEX-SSP2(2,2,2)"
  int s = 0;
  Eigen::MatrixXd a_explicit;
  Eigen::MatrixXd a_implicit;
  Eigen::VectorXd b;
  int order = 0;
  std::string type = "I";  // "II" when the first implicit stage is explicit (a11 = 0)
  bool stiffly_accurate = false;         // last implicit row equals b
  bool globally_stiffly_accurate = false;  // as classified where the tableau was published
  std::string stability;

  Eigen::VectorXd c_explicit() const { return a_explicit.rowwise().sum(); }
  Eigen::VectorXd c_implicit() const { return a_implicit.rowwise().sum(); }
};

ButcherTableau tableau(TableauId id);

/// Structural checks (shapes, triangularity, SA flag) and the classical plus
/// coupling order conditions up to the registered order. Returns the largest
/// residual; throws DataError on a structural defect.
double tableau_order_residual(const ButcherTableau& t);
void validate_tableau(const ButcherTableau& t, double tol = 1e-12);

inline constexpr double kGammaI2 = 0.29289321881345247559915563789515;  // (2 - √2)/2

}  // namespace pnp
