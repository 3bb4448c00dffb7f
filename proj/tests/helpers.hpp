#pragma once

#include <Eigen/Dense>

#include "pnp/analysis.hpp"
#include "pnp/fem.hpp"
#include "pnp/model.hpp"

namespace testing {

inline Eigen::MatrixXd dense(const pnp::SparseMatrix& m) { return Eigen::MatrixXd(m); }

inline std::shared_ptr<const pnp::FemOperators> square_ops(int n) {
  return std::make_shared<const pnp::FemOperators>(pnp::build_operators(pnp::make_square_grid(pnp::GridSpec{n})));
}

inline std::shared_ptr<const pnp::FemOperators> holed_ops(int n) {
  return std::make_shared<const pnp::FemOperators>(
      pnp::build_operators(pnp::make_level_set_grid(pnp::GridSpec{n}, {0.5, 0.5}, 0.15)));
}

}  // namespace testing
