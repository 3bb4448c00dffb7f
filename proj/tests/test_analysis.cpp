#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pnp/analysis.hpp"
#include "pnp/errors.hpp"

using namespace pnp;

TEST_SUITE("analysis") {
  TEST_CASE("orders from a geometric error sequence") {
    const auto o = orders_from_errors({4e-4, 1e-4, 2.5e-5});
    REQUIRE(o.size() == 2);
    CHECK(*o[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(*o[1] == doctest::Approx(2.0).epsilon(1e-12));
    const auto gaps = orders_from_errors({1e-3, std::nullopt, 1e-5, 0.0});
    CHECK_FALSE(gaps[0].has_value());
    CHECK_FALSE(gaps[1].has_value());
    CHECK_FALSE(gaps[2].has_value());
  }

  TEST_CASE("Richardson recovers the order of a manufactured C dt^p sequence") {
    for (double p : {1.0, 2.0, 3.0}) {
      const double c = 0.37;
      // the "solution" is C dt^p (limit zero), carried through RunOutcome::seconds
      auto run = [&](double dt) {
        RunOutcome o;
        o.seconds = c * std::pow(dt, p);
        o.steps = static_cast<int>(std::lround(0.1 / dt));
        return o;
      };
      auto dist = [](const RunOutcome& a, const RunOutcome& b) { return std::abs(a.seconds - b.seconds); };
      const ConvergenceReport r = richardson_orders(run, dist, 0.1, 5);
      REQUIRE(r.levels.size() == 5);
      CHECK(r.levels[0].dt == 0.1);
      CHECK(r.levels[4].dt == doctest::Approx(0.1 / 16));
      REQUIRE(r.errors.size() == 4);
      REQUIRE(r.orders.size() == 3);
      for (const auto& o : r.orders) CHECK(std::abs(*o - p) < 1e-12);
      CHECK(r.verdict == "converged");
      CHECK(std::abs(*r.finest_order() - p) < 1e-12);
    }
  }

  TEST_CASE("an unstable level poisons the verdict") {
    auto run = [](double dt) {
      RunOutcome o;
      o.blew_up = dt > 0.05;
      o.seconds = dt;
      return o;
    };
    auto dist = [](const RunOutcome& a, const RunOutcome& b) { return std::abs(a.seconds - b.seconds); };
    const ConvergenceReport r = richardson_orders(run, dist, 0.1, 4);
    CHECK_FALSE(r.stable);
    CHECK(r.verdict == "unstable");
    CHECK_FALSE(r.errors[0].has_value());
    CHECK(r.errors[1].has_value());
    CHECK_THROWS_AS(richardson_orders(run, dist, 0.1, 2), ConfigError);
  }

  TEST_CASE("l2 norm against the mass matrix") {
    const auto ops = testing::square_ops(8);
    const Vector ones = Vector::Ones(ops->n_active());
    CHECK(l2_norm(ones, ops->mass.matrix) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(l2_norm(3.0 * ones, ops->mass.matrix) == doctest::Approx(3.0).epsilon(1e-14));
    Vector bad = ones;
    bad[0] = std::nan("");
    CHECK_THROWS_AS(l2_norm(bad, ops->mass.matrix), DataError);
    CHECK_THROWS_AS(l2_norm(Vector::Ones(3), ops->mass.matrix), DataError);
  }

  TEST_CASE("applicability of scan cells") {
    CHECK(applicable(Scheme::imex(TableauId::I2), Formulation::Primitive, 1e-4));
    CHECK_FALSE(applicable(Scheme::split_scheme(), Formulation::QuasiNeutral, 1e-4));
    CHECK_FALSE(applicable(Scheme::imex(TableauId::I2), Formulation::Primitive, 0.0));
    CHECK(applicable(Scheme::imex(TableauId::I2), Formulation::QuasiNeutral, 0.0));
  }

  TEST_CASE("small scan is deterministic across thread counts") {
    Problem p;
    p.n_cells = 10;
    ScanSpec spec;
    spec.schemes = {Scheme::imex(TableauId::I2), Scheme::split_scheme()};
    spec.formulations = {Formulation::Primitive, Formulation::QuasiNeutral};
    spec.epsilons = {1e-2, 1e-4};
    spec.t_final = 0.2;
    spec.threads = 1;
    const StabilityMatrix a = stability_scan(p, spec);
    spec.threads = 3;
    const StabilityMatrix b = stability_scan(p, spec);
    REQUIRE(a.cells.size() == 8);
    REQUIRE(b.cells.size() == 8);
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      CHECK(a.cells[i].scheme.name() == b.cells[i].scheme.name());
      CHECK(a.cells[i].formulation == b.cells[i].formulation);
      CHECK(a.cells[i].epsilon == b.cells[i].epsilon);
      CHECK(a.cells[i].stable == b.cells[i].stable);
      CHECK(a.cells[i].mass_drift == b.cells[i].mass_drift);
    }
    const ScanCell* split_cq = a.find("split", Formulation::QuasiNeutral, 1e-2);
    REQUIRE(split_cq != nullptr);
    CHECK_FALSE(split_cq->applicable);
    const ScanCell* i2 = a.find("I2", Formulation::Primitive, 1e-4);
    REQUIRE(i2 != nullptr);
    CHECK(i2->stable);
    CHECK(i2->steps == 2);
  }

  TEST_CASE("timing with zero iterations gives an empty table") {
    Problem p;
    p.n_cells = 8;
    const TimingReport r = timing_report(p, {Formulation::Primitive, Formulation::QuasiNeutral}, {1e-4},
                                         Scheme::imex(TableauId::I2), 1.0, 0);
    CHECK(r.rows.empty());
    CHECK(r.iterations == 0);
    const TimingReport one = timing_report(p, {Formulation::Primitive}, {1e-4, 1e-6}, Scheme::imex(TableauId::I2),
                                           1.0, 2);
    REQUIRE(one.rows.size() == 2);
    CHECK(one.rows[0].primitive.has_value());
    CHECK(*one.rows[0].primitive > 0.0);
    CHECK_FALSE(one.rows[0].quasi_neutral.has_value());
  }

  TEST_CASE("worker count from the environment") {
    setenv("PNP_THREADS", "3", 1);
    CHECK(default_threads() == 3);
    setenv("PNP_THREADS", "zero", 1);
    CHECK_THROWS_AS(default_threads(), ConfigError);
    unsetenv("PNP_THREADS");
    CHECK(default_threads() >= 1);
  }
}
