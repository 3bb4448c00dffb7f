#include "pnp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {

CircleLevelSet::CircleLevelSet(Point center, double radius) : center_(center), radius_(radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw ConfigError("circle radius must be positive, got " + std::to_string(radius));
  }
}

double CircleLevelSet::operator()(Point p) const {
  return radius_ - std::hypot(p.x - center_.x, p.y - center_.y);
}

CircleLevelSet build_level_set(const GridSpec& spec, Point center, double radius) {
  if (spec.n_cells <= 0 || !(spec.side_length > 0.0)) {
    throw ConfigError("grid needs a positive cell count and side length");
  }
  CircleLevelSet ls(center, radius);
  const double clearance = 2.0 * spec.h();
  const double lo_x = spec.origin.x + clearance, hi_x = spec.origin.x + spec.side_length - clearance;
  const double lo_y = spec.origin.y + clearance, hi_y = spec.origin.y + spec.side_length - clearance;
  if (center.x - radius < lo_x || center.x + radius > hi_x || center.y - radius < lo_y ||
      center.y + radius > hi_y) {
    throw ConfigError("circle must stay at least 2h away from the outer square boundary");
  }
  ls.node_values_.resize(spec.node_count());
  for (int j = 0; j < spec.nodes_per_side(); ++j) {
    for (int i = 0; i < spec.nodes_per_side(); ++i) {
      ls.node_values_[spec.node_index(i, j)] = ls(spec.node(i, j));
    }
  }
  return ls;
}

int NodeClassification::count(NodeTag tag) const {
  return static_cast<int>(std::count(tags.begin(), tags.end(), tag));
}

namespace {

// Rebuilds ghost/inactive tags and the active index map from the internal set.
void derive_ghosts(const GridSpec& spec, NodeClassification& cls) {
  const int n = spec.nodes_per_side();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int node = spec.node_index(i, j);
      if (cls.tags[node] == NodeTag::Internal) continue;
      bool touches_interior = false;
      for (int dj = -1; dj <= 1 && !touches_interior; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di, jj = j + dj;
          if ((di == 0 && dj == 0) || ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
          if (cls.tags[spec.node_index(ii, jj)] == NodeTag::Internal) {
            touches_interior = true;
            break;
          }
        }
      }
      cls.tags[node] = touches_interior ? NodeTag::Ghost : NodeTag::Inactive;
    }
  }
  cls.active_index.assign(cls.tags.size(), -1);
  cls.active_nodes.clear();
  for (std::size_t node = 0; node < cls.tags.size(); ++node) {
    if (cls.tags[node] != NodeTag::Inactive) {
      cls.active_index[node] = static_cast<int>(cls.active_nodes.size());
      cls.active_nodes.push_back(static_cast<int>(node));
    }
  }
}

}  // namespace

NodeClassification classify_nodes(const GridSpec& spec, const CircleLevelSet& ls) {
  const auto phi = ls.node_values();
  if (static_cast<int>(phi.size()) != spec.node_count()) {
    throw ConfigError("level set is not sampled on this grid");
  }
  NodeClassification cls;
  cls.tags.resize(spec.node_count());
  cls.snapped.assign(spec.node_count(), false);
  for (int node = 0; node < spec.node_count(); ++node) {
    cls.tags[node] = phi[node] < 0.0 ? NodeTag::Internal : NodeTag::Inactive;
  }
  derive_ghosts(spec, cls);
  return cls;
}

NodeClassification snap_small_cells(const GridSpec& spec, const NodeClassification& cls,
                                    const CircleLevelSet& ls) {
  const auto phi = ls.node_values();
  const double threshold = spec.h() * spec.h();
  NodeClassification out = cls;
  for (int node = 0; node < spec.node_count(); ++node) {
    if (out.tags[node] == NodeTag::Internal && std::abs(phi[node]) < threshold) {
      out.tags[node] = NodeTag::Inactive;  // re-derived below
      out.snapped[node] = true;
    }
  }
  derive_ghosts(spec, out);
  if (out.count(NodeTag::Internal) == 0) {
    throw GeometryError("snapping left no internal nodes");
  }
  return out;
}

double BoundarySegment::length() const { return std::hypot(b.x - a.x, b.y - a.y); }

double BoundaryPolyline::length() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.length();
  return total;
}

BoundaryPolyline boundary_polyline(const GridSpec& spec, const CircleLevelSet& ls) {
  const Point c = ls.center();
  const double r = ls.radius();
  std::vector<Point> hits;
  for (int k = 0; k <= spec.n_cells; ++k) {
    const double line = spec.origin.x + k * spec.h();
    const double d = line - c.x;
    const double disc = r * r - d * d;
    if (disc < 0.0) continue;
    const double s = std::sqrt(disc);
    hits.push_back({line, c.y + s});
    hits.push_back({line, c.y - s});
  }
  for (int k = 0; k <= spec.n_cells; ++k) {
    const double line = spec.origin.y + k * spec.h();
    const double d = line - c.y;
    const double disc = r * r - d * d;
    if (disc < 0.0) continue;
    const double s = std::sqrt(disc);
    hits.push_back({c.x + s, line});
    hits.push_back({c.x - s, line});
  }
  auto angle = [&](Point p) { return std::atan2(p.y - c.y, p.x - c.x); };
  std::sort(hits.begin(), hits.end(), [&](Point a, Point b) { return angle(a) < angle(b); });
  // Grid-node hits and tangencies show up twice.
  const double merge_tol = 1e-12 * spec.h();
  std::vector<Point> unique;
  for (const Point& p : hits) {
    if (!unique.empty() && std::hypot(p.x - unique.back().x, p.y - unique.back().y) <= merge_tol) {
      continue;
    }
    unique.push_back(p);
  }
  if (unique.size() > 1 &&
      std::hypot(unique.front().x - unique.back().x, unique.front().y - unique.back().y) <=
          merge_tol) {
    unique.pop_back();
  }
  if (unique.size() < 3) {
    throw GeometryError("circle meets the grid in fewer than 3 points");
  }
  BoundaryPolyline poly;
  poly.segments.reserve(unique.size());
  for (std::size_t k = 0; k < unique.size(); ++k) {
    const Point a = unique[k];
    const Point b = unique[(k + 1) % unique.size()];
    // Counter-clockwise traversal: the left-hand normal points to the center.
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    poly.segments.push_back({a, b, {-(b.y - a.y) / len, (b.x - a.x) / len}});
  }
  return poly;
}

Point circle_edge_crossing(const CircleLevelSet& ls, Point a, Point b) {
  // |a - c + t (b - a)|^2 = r^2 has exactly one root in (0, 1) when the
  // endpoints lie on opposite sides of the circle.
  const Point c = ls.center();
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double ax = a.x - c.x, ay = a.y - c.y;
  const double qa = dx * dx + dy * dy;
  const double qb = 2.0 * (ax * dx + ay * dy);
  const double qc = ax * ax + ay * ay - ls.radius() * ls.radius();
  const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
  const double sq = std::sqrt(disc);
  // Cancellation-free pair of roots.
  const double q = -0.5 * (qb + std::copysign(sq, qb));
  double t1 = q / qa;
  double t2 = q != 0.0 ? qc / q : t1;
  double t = (t1 >= 0.0 && t1 <= 1.0) ? t1 : t2;
  if (t1 >= 0.0 && t1 <= 1.0 && t2 >= 0.0 && t2 <= 1.0) {
    // Both in range only for a grazing edge; keep the one nearer the sign change midpoint.
    t = std::abs(t1 - 0.5) < std::abs(t2 - 0.5) ? t1 : t2;
  }
  t = std::clamp(t, 0.0, 1.0);
  return {a.x + t * dx, a.y + t * dy};
}

LevelSetGrid make_level_set_grid(const GridSpec& spec, Point center, double radius, bool snap) {
  LevelSetGrid grid{spec, build_level_set(spec, center, radius), {}, {}};
  const CircleLevelSet& ls = *grid.obstacle;
  grid.classification = classify_nodes(spec, ls);
  if (snap) grid.classification = snap_small_cells(spec, grid.classification, ls);
  if (grid.classification.count(NodeTag::Internal) == 0) {
    throw GeometryError("domain has no internal nodes");
  }
  const auto phi = ls.node_values();
  grid.effective_phi.assign(phi.begin(), phi.end());
  for (int node = 0; node < spec.node_count(); ++node) {
    if (grid.classification.snapped[node]) grid.effective_phi[node] = 0.0;
  }
  return grid;
}

LevelSetGrid make_square_grid(const GridSpec& spec) {
  if (spec.n_cells <= 0 || !(spec.side_length > 0.0)) {
    throw ConfigError("grid needs a positive cell count and side length");
  }
  LevelSetGrid grid{spec, std::nullopt, {}, std::vector<double>(spec.node_count(), -1.0)};
  auto& cls = grid.classification;
  cls.tags.assign(spec.node_count(), NodeTag::Internal);
  cls.snapped.assign(spec.node_count(), false);
  cls.active_index.resize(spec.node_count());
  cls.active_nodes.resize(spec.node_count());
  for (int node = 0; node < spec.node_count(); ++node) {
    cls.active_index[node] = node;
    cls.active_nodes[node] = node;
  }
  return grid;
}

}  // namespace pnp
