#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pnp/errors.hpp"
#include "pnp/geometry.hpp"

using namespace pnp;

TEST_SUITE("geometry") {
  TEST_CASE("grid indexing is row-major from the origin") {
    const GridSpec g{4};
    CHECK(g.h() == doctest::Approx(0.25));
    CHECK(g.node_count() == 25);
    CHECK(g.node_index(3, 2) == 13);
    const Point p = g.node(13);
    CHECK(p.x == doctest::Approx(0.75));
    CHECK(p.y == doctest::Approx(0.5));
  }

  TEST_CASE("level set is a signed distance, positive inside") {
    const CircleLevelSet ls({0.5, 0.5}, 0.15);
    CHECK(ls({0.5, 0.5}) == doctest::Approx(0.15));
    CHECK(ls({0.5, 0.9}) == doctest::Approx(-0.25));
    CHECK(ls({0.65, 0.5}) == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("circle too close to the outer boundary is rejected") {
    CHECK_THROWS_AS(build_level_set(GridSpec{10}, {0.5, 0.5}, 0.35), ConfigError);
    CHECK_THROWS_AS(build_level_set(GridSpec{10}, {0.5, 0.5}, -0.1), ConfigError);
    CHECK_NOTHROW(build_level_set(GridSpec{10}, {0.5, 0.5}, 0.3));
  }

  TEST_CASE("square grid keeps every node active in node order") {
    const LevelSetGrid g = make_square_grid(GridSpec{6});
    REQUIRE(g.n_active() == 49);
    for (int i = 0; i < 49; ++i) CHECK(g.classification.active_nodes[i] == i);
    CHECK(g.classification.count(NodeTag::Internal) == 49);
  }

  TEST_CASE("classification around the obstacle") {
    const GridSpec spec{40};
    const LevelSetGrid g = make_level_set_grid(spec, {0.5, 0.5}, 0.15);
    const auto& cls = g.classification;
    const double h = spec.h();
    int ghosts = 0;
    for (int node = 0; node < spec.node_count(); ++node) {
      const double phi = (*g.obstacle)(spec.node(node));
      switch (cls.tags[node]) {
        case NodeTag::Internal:
          // snapping keeps internal nodes at least h^2 away in level-set value
          CHECK(phi <= -h * h);
          CHECK(cls.active_index[node] >= 0);
          break;
        case NodeTag::Ghost:
          ++ghosts;
          CHECK(phi > -h * h);
          CHECK(phi < 2.0 * h);
          CHECK(cls.active_index[node] >= 0);
          break;
        case NodeTag::Inactive:
          CHECK(phi > 0.0);
          CHECK(cls.active_index[node] == -1);
          break;
      }
    }
    CHECK(ghosts > 0);
    CHECK(ghosts == cls.count(NodeTag::Ghost));
    for (int dof = 0; dof < cls.n_active(); ++dof) CHECK(cls.active_index[cls.active_nodes[dof]] == dof);
  }

  TEST_CASE("snapping is idempotent") {
    const GridSpec spec{32};
    const CircleLevelSet ls = build_level_set(spec, {0.5, 0.5}, 0.15);
    const NodeClassification once = snap_small_cells(spec, classify_nodes(spec, ls), ls);
    const NodeClassification twice = snap_small_cells(spec, once, ls);
    CHECK(once.tags == twice.tags);
    CHECK(once.active_nodes == twice.active_nodes);
  }

  TEST_CASE("boundary polyline converges to the circle") {
    double previous = 1.0;
    for (int n : {20, 40, 80}) {
      const GridSpec spec{n};
      const BoundaryPolyline poly = boundary_polyline(spec, build_level_set(spec, {0.5, 0.5}, 0.15));
      const double exact = 2.0 * std::numbers::pi * 0.15;
      const double err = std::abs(poly.length() - exact) / exact;
      CHECK(poly.length() < exact);  // chords are shorter than arcs
      CHECK(err < previous);
      previous = err;
      for (const auto& s : poly.segments) {
        // outward from the region means pointing toward the center
        const Point mid{0.5 * (s.a.x + s.b.x), 0.5 * (s.a.y + s.b.y)};
        CHECK(s.normal.x * (0.5 - mid.x) + s.normal.y * (0.5 - mid.y) > 0.0);
        CHECK(std::hypot(s.normal.x, s.normal.y) == doctest::Approx(1.0));
      }
    }
    CHECK(previous < 2e-3);
  }

  TEST_CASE("edge crossing lands on the circle") {
    const CircleLevelSet ls({0.5, 0.5}, 0.15);
    const Point p = circle_edge_crossing(ls, {0.5, 0.5}, {0.9, 0.5});
    CHECK(p.x == doctest::Approx(0.65));
    CHECK(p.y == doctest::Approx(0.5));
    const Point q = circle_edge_crossing(ls, {0.55, 0.3}, {0.55, 0.45});
    CHECK(std::abs(ls(q)) < 1e-14);
  }
}
