#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pnp {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Uniform Cartesian grid over the square [origin, origin + side_length]^2.
struct GridSpec {
  int n_cells = 100;
  double side_length = 1.0;
  Point origin{0.0, 0.0};

  double h() const { return side_length / n_cells; }
  int nodes_per_side() const { return n_cells + 1; }
  int node_count() const { return nodes_per_side() * nodes_per_side(); }
  int cell_count() const { return n_cells * n_cells; }
  int node_index(int i, int j) const { return j * nodes_per_side() + i; }
  Point node(int i, int j) const {
    return {origin.x + i * h(), origin.y + j * h()};
  }
  Point node(int index) const {
    return node(index % nodes_per_side(), index / nodes_per_side());
  }
};

// Signed distance to a circular obstacle, positive inside the circle.
// The computational region is {phi < 0}.
class CircleLevelSet {
public:
  CircleLevelSet(Point center, double radius);

  double operator()(Point p) const;
  Point center() const { return center_; }
  double radius() const { return radius_; }

  // Values cached at every grid node (row-major); empty for a bare evaluator.
  std::span<const double> node_values() const { return node_values_; }

private:
  friend CircleLevelSet build_level_set(const GridSpec&, Point, double);

  Point center_;
  double radius_;
  std::vector<double> node_values_;
};

// Validates that the circle sits inside the square with a 2h clearance and
// samples it at the grid nodes.
CircleLevelSet build_level_set(const GridSpec& spec, Point center, double radius);

enum class NodeTag : std::uint8_t { Internal, Ghost, Inactive };

struct NodeClassification {
  std::vector<NodeTag> tags;
  std::vector<bool> snapped;       // internal nodes demoted by snapping
  std::vector<int> active_index;   // node -> active dof, -1 when inactive
  std::vector<int> active_nodes;   // active dof -> node

  int n_active() const { return static_cast<int>(active_nodes.size()); }
  int count(NodeTag tag) const;
};

NodeClassification classify_nodes(const GridSpec& spec, const CircleLevelSet& ls);

// Demotes internal nodes closer than h^2 (in level-set value) to the
// boundary and re-derives the ghost layer. Idempotent.
NodeClassification snap_small_cells(const GridSpec& spec, const NodeClassification& cls,
                                    const CircleLevelSet& ls);

struct BoundarySegment {
  Point a;
  Point b;
  Point normal;  // unit, pointing out of the computational region (into the obstacle)
  double length() const;
};

struct BoundaryPolyline {
  std::vector<BoundarySegment> segments;
  double length() const;
};

// Closed chord polygon through the intersections of the circle with grid lines,
// ordered counter-clockwise around the center.
BoundaryPolyline boundary_polyline(const GridSpec& spec, const CircleLevelSet& ls);

// Exact intersection of the circle with the segment [a, b] when the level set
// changes sign strictly between the endpoints.
Point circle_edge_crossing(const CircleLevelSet& ls, Point a, Point b);

// Grid + (optional) obstacle + final node classification: the discrete domain.
struct LevelSetGrid {
  GridSpec spec;
  std::optional<CircleLevelSet> obstacle;
  NodeClassification classification;
  // Node-sampled level set with snapped nodes moved onto the boundary (value 0).
  std::vector<double> effective_phi;

  int n_active() const { return classification.n_active(); }
};

LevelSetGrid make_level_set_grid(const GridSpec& spec, Point center, double radius,
                                 bool snap = true);
LevelSetGrid make_square_grid(const GridSpec& spec);

}  // namespace pnp
