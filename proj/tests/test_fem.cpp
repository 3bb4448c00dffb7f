#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "oracles.hpp"
#include "pnp/fem.hpp"

using namespace pnp;
using Eigen::MatrixXd;

using oracle::Q1Basis;
using oracle::sample;

TEST_SUITE("fem") {
  TEST_CASE("reference shape functions form a partition of unity") {
    for (double xi : {0.0, 0.3, 1.0}) {
      for (double eta : {0.0, 0.7}) {
        const auto v = q1::values(xi, eta);
        const auto g = q1::gradients(xi, eta);
        CHECK(v[0] + v[1] + v[2] + v[3] == doctest::Approx(1.0));
        CHECK(g[0][0] + g[1][0] + g[2][0] + g[3][0] == doctest::Approx(0.0));
        CHECK(g[0][1] + g[1][1] + g[2][1] + g[3][1] == doctest::Approx(0.0));
      }
    }
    CHECK(q1::values(0.0, 0.0)[0] == 1.0);
    CHECK(q1::values(1.0, 1.0)[2] == 1.0);
  }

  TEST_CASE("4x4 operators match brute-force quadrature") {
    const Q1Basis bf(4);
    const auto ops = testing::square_ops(4);
    REQUIRE(ops->n_active() == bf.nodes());
    CHECK(oracle::max_abs_diff(testing::dense(ops->mass.matrix), bf.mass()) < 1e-12);
    CHECK(oracle::max_abs_diff(testing::dense(ops->stiffness.matrix), bf.stiffness()) < 1e-12);
    const Vector w = sample(bf.nodes(), 0.7);
    CHECK(oracle::max_abs_diff(testing::dense(ops->drift(w, DriftMode::H).matrix), bf.drift_h(w)) < 1e-12);
    CHECK(oracle::max_abs_diff(testing::dense(ops->drift(w, DriftMode::G).matrix), bf.drift_g(w)) < 1e-12);
  }

  TEST_CASE("structural identities hold on the perforated domain") {
    const auto ops = testing::holed_ops(24);
    const int n = ops->n_active();
    const Vector ones = Vector::Ones(n);
    const MatrixXd l = testing::dense(ops->stiffness.matrix);
    const MatrixXd m = testing::dense(ops->mass.matrix);

    CHECK((l * ones).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((l - l.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-16);
    CHECK(m.minCoeff() >= 0.0);
    CHECK(ops->lumped.sum() == doctest::Approx(ops->area()).epsilon(1e-13));
    // the chord polygon is inscribed, so the domain is slightly larger than 1 - pi r^2
    const double exact = 1.0 - std::numbers::pi * 0.15 * 0.15;
    CHECK(ops->area() > exact);
    CHECK(ops->area() - exact < 2e-3);

    // H[1] is the Laplacian, G[const] vanishes
    CHECK((testing::dense(ops->drift(ones, DriftMode::H).matrix) - l).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(testing::dense(ops->drift(3.0 * ones, DriftMode::G).matrix).cwiseAbs().maxCoeff() < 1e-12);

    // H[c] Phi and G[Phi] c are two readings of (c grad Phi, grad v)
    const Vector c = sample(n, 0.37);
    const Vector phi = sample(n, 1.91);
    const Vector a = ops->drift(c, DriftMode::H).apply(phi);
    const Vector b = ops->drift(phi, DriftMode::G).apply(c);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13 * std::max(1.0, a.cwiseAbs().maxCoeff()));
    // drift columns conserve mass: 1^T G = 0
    CHECK((ones.transpose() * testing::dense(ops->drift(phi, DriftMode::G).matrix)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("every operator shares the assembler pattern") {
    const auto ops = testing::holed_ops(16);
    const Vector w = sample(ops->n_active(), 0.5);
    const SparseMatrix& p = ops->assembler->pattern();
    for (const SparseMatrix* m : {&ops->mass.matrix, &ops->stiffness.matrix}) {
      CHECK(m->nonZeros() == p.nonZeros());
    }
    const SparseOperator h = ops->drift(w, DriftMode::H);
    CHECK(h.matrix.nonZeros() == p.nonZeros());
    CHECK(std::equal(h.matrix.innerIndexPtr(), h.matrix.innerIndexPtr() + p.nonZeros(), p.innerIndexPtr()));
    CHECK_THROWS_AS(ops->drift(Vector::Ones(3), DriftMode::G), DataError);
  }

  TEST_CASE("cut cells have positive area and sane quadrature") {
    const LevelSetGrid grid = make_level_set_grid(GridSpec{20}, {0.5, 0.5}, 0.15);
    int cut = 0;
    const double h = grid.spec.h();
    for (int j = 0; j < 20; ++j) {
      for (int i = 0; i < 20; ++i) {
        CutCellGeometry geo;
        try {
          geo = clip_cell(grid, i, j);
        } catch (const GeometryError&) {
          continue;
        }
        ++cut;
        CHECK(geo.area() > 0.0);
        CHECK(geo.area() < h * h + 1e-15);
        CHECK(geo.area() >= CutCellGeometry::kMinAreaFactor * h * h * h * h);
        double wsum = 0.0;
        for (double w : geo.weights) wsum += w;
        CHECK(wsum == doctest::Approx(geo.area()).epsilon(1e-12));
        for (const Point& r : geo.ref_points) {
          CHECK(r.x >= -1e-12);
          CHECK(r.x <= 1.0 + 1e-12);
          CHECK(r.y >= -1e-12);
          CHECK(r.y <= 1.0 + 1e-12);
        }
      }
    }
    CHECK(cut > 8);
  }
}
