#include "pnp/fem.hpp"

#include <algorithm>
#include <cmath>

#include "pnp/errors.hpp"

namespace pnp {

namespace q1 {

std::array<double, 4> values(double xi, double eta) {
  return {(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta};
}

std::array<std::array<double, 2>, 4> gradients(double xi, double eta) {
  return {{{-(1.0 - eta), -(1.0 - xi)}, {1.0 - eta, -xi}, {eta, xi}, {-eta, 1.0 - xi}}};
}

}  // namespace q1

namespace {

constexpr std::array<std::array<int, 2>, 4> kCorner{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};

QuadraturePoint make_point(double xi, double eta, double weight, double h) {
  QuadraturePoint qp;
  qp.weight = weight;
  qp.value = q1::values(xi, eta);
  const auto g = q1::gradients(xi, eta);
  for (int a = 0; a < 4; ++a) {
    qp.grad[a] = {g[a][0] / h, g[a][1] / h};
  }
  return qp;
}

double shoelace(const std::vector<Point>& poly) {
  double twice = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& p = poly[k];
    const Point& q = poly[(k + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

std::array<double, 4> corner_phi(const LevelSetGrid& grid, int i, int j) {
  std::array<double, 4> phi{};
  for (int a = 0; a < 4; ++a) {
    phi[a] = grid.effective_phi[grid.spec.node_index(i + kCorner[a][0], j + kCorner[a][1])];
  }
  return phi;
}

}  // namespace

double CutCellGeometry::area() const { return shoelace(polygon); }

CutCellGeometry clip_cell(const LevelSetGrid& grid, int i, int j) {
  const auto phi = corner_phi(grid, i, j);
  const bool any_in = std::any_of(phi.begin(), phi.end(), [](double v) { return v < 0.0; });
  const bool any_out = std::any_of(phi.begin(), phi.end(), [](double v) { return v > 0.0; });
  if (!any_in || !any_out || !grid.obstacle) {
    throw GeometryError("cell (" + std::to_string(i) + "," + std::to_string(j) +
                        ") is not cut by the boundary");
  }
  const GridSpec& spec = grid.spec;
  std::array<Point, 4> corner;
  for (int a = 0; a < 4; ++a) corner[a] = spec.node(i + kCorner[a][0], j + kCorner[a][1]);

  CutCellGeometry geo;
  for (int a = 0; a < 4; ++a) {
    const int b = (a + 1) % 4;
    if (phi[a] <= 0.0) geo.polygon.push_back(corner[a]);
    if ((phi[a] < 0.0 && phi[b] > 0.0) || (phi[a] > 0.0 && phi[b] < 0.0)) {
      geo.polygon.push_back(circle_edge_crossing(*grid.obstacle, corner[a], corner[b]));
    }
  }
  // Crossings that land on a vertex produce duplicates.
  const double tol = 1e-14 * spec.h();
  std::vector<Point> cleaned;
  for (const Point& p : geo.polygon) {
    if (!cleaned.empty() && std::hypot(p.x - cleaned.back().x, p.y - cleaned.back().y) <= tol) {
      continue;
    }
    cleaned.push_back(p);
  }
  while (cleaned.size() > 1 &&
         std::hypot(cleaned.front().x - cleaned.back().x, cleaned.front().y - cleaned.back().y) <=
             tol) {
    cleaned.pop_back();
  }
  geo.polygon = std::move(cleaned);

  Point centroid{0.0, 0.0};
  for (const Point& p : geo.polygon) {
    centroid.x += p.x;
    centroid.y += p.y;
  }
  centroid.x /= static_cast<double>(geo.polygon.size());
  centroid.y /= static_cast<double>(geo.polygon.size());

  // Degree-2 three-point rule on each fan triangle; signed areas keep the
  // decomposition exact even if the polygon is not star-shaped about the centroid.
  constexpr double kA = 2.0 / 3.0, kB = 1.0 / 6.0;
  const Point base = corner[0];
  for (std::size_t k = 0; k < geo.polygon.size(); ++k) {
    const Point& p = geo.polygon[k];
    const Point& q = geo.polygon[(k + 1) % geo.polygon.size()];
    const double area =
        0.5 * ((p.x - centroid.x) * (q.y - centroid.y) - (q.x - centroid.x) * (p.y - centroid.y));
    geo.triangle_areas.push_back(area);
    const std::array<std::array<double, 3>, 3> bary{{{kA, kB, kB}, {kB, kA, kB}, {kB, kB, kA}}};
    for (const auto& l : bary) {
      const double x = l[0] * centroid.x + l[1] * p.x + l[2] * q.x;
      const double y = l[0] * centroid.y + l[1] * p.y + l[2] * q.y;
      geo.ref_points.push_back({(x - base.x) / spec.h(), (y - base.y) / spec.h()});
      geo.weights.push_back(area / 3.0);
    }
  }
  return geo;
}

FemAssembler::FemAssembler(const LevelSetGrid& grid) : n_active_(grid.n_active()) {
  if (n_active_ == 0) throw GeometryError("empty domain: no active nodes");
  const GridSpec& spec = grid.spec;
  const double h = spec.h();
  const auto& active = grid.classification.active_index;

  // 2x2 Gauss is exact for every integrand used here on full cells.
  const double g = 0.5 / std::sqrt(3.0);
  const std::array<double, 2> gauss{0.5 - g, 0.5 + g};

  for (int j = 0; j < spec.n_cells; ++j) {
    for (int i = 0; i < spec.n_cells; ++i) {
      const auto phi = corner_phi(grid, i, j);
      const bool any_in = std::any_of(phi.begin(), phi.end(), [](double v) { return v < 0.0; });
      if (!any_in) continue;
      const bool full = std::all_of(phi.begin(), phi.end(), [](double v) { return v <= 0.0; });
      CellRule rule;
      rule.i = i;
      rule.j = j;
      for (int a = 0; a < 4; ++a) {
        rule.dofs[a] = active[spec.node_index(i + kCorner[a][0], j + kCorner[a][1])];
        if (rule.dofs[a] < 0) {
          throw GeometryError("cell with interior vertex touches an inactive node");
        }
      }
      if (full) {
        rule.area = h * h;
        for (double eta : gauss) {
          for (double xi : gauss) rule.points.push_back(make_point(xi, eta, 0.25 * h * h, h));
        }
      } else {
        rule.cut = true;
        const CutCellGeometry geo = clip_cell(grid, i, j);
        rule.area = geo.area();
        for (std::size_t q = 0; q < geo.weights.size(); ++q) {
          rule.points.push_back(make_point(geo.ref_points[q].x, geo.ref_points[q].y,
                                           geo.weights[q], h));
        }
      }
      area_ += rule.area;
      cells_.push_back(std::move(rule));
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(cells_.size() * 16);
  for (const auto& cell : cells_) {
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) triplets.emplace_back(cell.dofs[a], cell.dofs[b], 0.0);
    }
  }
  pattern_.resize(n_active_, n_active_);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  scatter_.resize(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const int row = cells_[c].dofs[a], col = cells_[c].dofs[b];
        const int* pos = std::lower_bound(inner + outer[col], inner + outer[col + 1], row);
        scatter_[c][a * 4 + b] = static_cast<int>(pos - inner);
      }
    }
  }
}

SparseOperator FemAssembler::mass() const {
  SparseOperator op{pattern_, true, "(u, v)"};
  double* values = op.matrix.valuePtr();
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    for (const auto& qp : cells_[c].points) {
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          values[scatter_[c][a * 4 + b]] += qp.weight * qp.value[a] * qp.value[b];
        }
      }
    }
  }
  return op;
}

SparseOperator FemAssembler::stiffness() const {
  SparseOperator op{pattern_, true, "(grad u, grad v)"};
  double* values = op.matrix.valuePtr();
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    for (const auto& qp : cells_[c].points) {
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          values[scatter_[c][a * 4 + b]] +=
              qp.weight * (qp.grad[a][0] * qp.grad[b][0] + qp.grad[a][1] * qp.grad[b][1]);
        }
      }
    }
  }
  return op;
}

SparseOperator FemAssembler::drift(const Vector& w, DriftMode mode) const {
  if (w.size() != n_active_) {
    throw DataError("drift coefficient has " + std::to_string(w.size()) + " entries, expected " +
                    std::to_string(n_active_));
  }
  SparseOperator op{pattern_, false,
                    mode == DriftMode::H ? "(w grad u, grad v)" : "(u grad w, grad v)"};
  double* values = op.matrix.valuePtr();
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& cell = cells_[c];
    const std::array<double, 4> wl{w[cell.dofs[0]], w[cell.dofs[1]], w[cell.dofs[2]],
                                   w[cell.dofs[3]]};
    for (const auto& qp : cell.points) {
      if (mode == DriftMode::H) {
        double wq = 0.0;
        for (int k = 0; k < 4; ++k) wq += wl[k] * qp.value[k];
        const double s = qp.weight * wq;
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            values[scatter_[c][a * 4 + b]] +=
                s * (qp.grad[a][0] * qp.grad[b][0] + qp.grad[a][1] * qp.grad[b][1]);
          }
        }
      } else {
        double gx = 0.0, gy = 0.0;
        for (int k = 0; k < 4; ++k) {
          gx += wl[k] * qp.grad[k][0];
          gy += wl[k] * qp.grad[k][1];
        }
        for (int a = 0; a < 4; ++a) {
          const double flux = qp.weight * (gx * qp.grad[a][0] + gy * qp.grad[a][1]);
          for (int b = 0; b < 4; ++b) values[scatter_[c][a * 4 + b]] += flux * qp.value[b];
        }
      }
    }
  }
  return op;
}

SparseOperator assemble_mass(const LevelSetGrid& grid) { return FemAssembler(grid).mass(); }

SparseOperator assemble_stiffness(const LevelSetGrid& grid) {
  return FemAssembler(grid).stiffness();
}

SparseOperator assemble_drift(const LevelSetGrid& grid, const Vector& w, DriftMode mode) {
  return FemAssembler(grid).drift(w, mode);
}

FemOperators build_operators(const LevelSetGrid& grid) {
  auto assembler = std::make_shared<const FemAssembler>(grid);
  FemOperators ops{assembler, assembler->mass(), assembler->stiffness(), {}, {}, grid.spec.h()};
  ops.lumped = ops.mass.matrix * Vector::Ones(ops.n_active());
  ops.dof_points.reserve(ops.n_active());
  for (int node : grid.classification.active_nodes) ops.dof_points.push_back(grid.spec.node(node));
  return ops;
}

}  // namespace pnp
