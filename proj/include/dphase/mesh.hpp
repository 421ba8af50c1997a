#pragma once

// Structured 1D/2D grids with P1 elements. In 2D every rectangular cell is
// split along its lower-left to upper-right diagonal. Nodes are numbered
// row-major with x running fastest.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/small_linalg.hpp"

namespace dphase {

struct Element {
  std::array<int, 3> nodes{};
  int count = 0;  // 2 for segments, 3 for triangles
  double measure = 0.0;
  std::array<GradVec, 3> basis_grad{};
  Point barycenter;
};

class Grid {
 public:
  static std::shared_ptr<const Grid> line(int nx, double length, double origin = 0.0) {
    return std::shared_ptr<const Grid>(new Grid(1, nx, 1, length, 0.0, origin, 0.0));
  }
  static std::shared_ptr<const Grid> rectangle(int nx, int ny, double lx, double ly, double ox = 0.0,
                                               double oy = 0.0) {
    return std::shared_ptr<const Grid>(new Grid(2, nx, ny, lx, ly, ox, oy));
  }
  /// Same domain, nodes per axis = 2 * (n - 1) + 1.
  std::shared_ptr<const Grid> refined() const {
    if (dim_ == 1) return line(2 * (nx_ - 1) + 1, lx_, ox_);
    return rectangle(2 * (nx_ - 1) + 1, 2 * (ny_ - 1) + 1, lx_, ly_, ox_, oy_);
  }

  int dim() const { return dim_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double ox() const { return ox_; }
  double oy() const { return oy_; }
  double hx() const { return lx_ / (nx_ - 1); }
  double hy() const { return dim_ == 1 ? hx() : ly_ / (ny_ - 1); }
  double h() const { return std::max(hx(), hy()); }
  int node_count() const { return nx_ * ny_; }

  int index(int i, int j = 0) const { return j * nx_ + i; }
  int ix(int node) const { return node % nx_; }
  int iy(int node) const { return node / nx_; }

  Point node(int k) const {
    return dim_ == 1 ? Point{ox_ + ix(k) * hx(), 0.0} : Point{ox_ + ix(k) * hx(), oy_ + iy(k) * hy()};
  }

  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<int>& boundary_nodes() const { return boundary_; }
  const std::vector<int>& interior_nodes() const { return interior_; }
  bool is_boundary(int k) const { return is_boundary_[k] != 0; }

  /// Index distance to the nearest boundary node (0 on the boundary).
  int depth(int k) const {
    int d = std::min(ix(k), nx_ - 1 - ix(k));
    if (dim_ == 2) d = std::min({d, iy(k), ny_ - 1 - iy(k)});
    return d;
  }

  double measure() const { return dim_ == 1 ? lx_ : lx_ * ly_; }
  double diameter() const { return dim_ == 1 ? lx_ : std::hypot(lx_, ly_); }

  bool same_as(const Grid& o) const {
    return dim_ == o.dim_ && nx_ == o.nx_ && ny_ == o.ny_ && lx_ == o.lx_ && ly_ == o.ly_ && ox_ == o.ox_ &&
           oy_ == o.oy_;
  }

  /// Grid-neighbour ring of an interior or boundary node (excludes the node).
  std::vector<int> one_ring(int k) const {
    std::vector<int> out;
    const int i = ix(k), j = iy(k);
    for (int dj = (dim_ == 2 ? -1 : 0); dj <= (dim_ == 2 ? 1 : 0); ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const int a = i + di, b = j + dj;
        if (a < 0 || a >= nx_ || b < 0 || b >= ny_) continue;
        out.push_back(index(a, b));
      }
    }
    return out;
  }

 private:
  Grid(int dim, int nx, int ny, double lx, double ly, double ox, double oy)
      : dim_(dim), nx_(nx), ny_(ny), lx_(lx), ly_(ly), ox_(ox), oy_(oy) {
    if (nx_ < 3 || (dim_ == 2 && ny_ < 3)) throw Error(ErrorCode::InvalidGrid, "need at least 3 nodes per axis");
    if (!(lx_ > 0.0) || (dim_ == 2 && !(ly_ > 0.0))) throw Error(ErrorCode::InvalidGrid, "extents must be positive");
    if (!std::isfinite(lx_ + ly_ + ox_ + oy_)) throw Error(ErrorCode::InvalidGrid, "non-finite grid geometry");
    build();
  }

  void build() {
    is_boundary_.assign(node_count(), 0);
    for (int k = 0; k < node_count(); ++k) {
      const bool b = depth(k) == 0;
      is_boundary_[k] = b;
      (b ? boundary_ : interior_).push_back(k);
    }
    if (dim_ == 1) {
      for (int i = 0; i + 1 < nx_; ++i) {
        Element e;
        e.count = 2;
        e.nodes = {i, i + 1, -1};
        e.measure = hx();
        e.basis_grad = {GradVec(-1.0 / hx()), GradVec(1.0 / hx()), GradVec(0.0)};
        e.barycenter = {ox_ + (i + 0.5) * hx(), 0.0};
        elements_.push_back(e);
      }
      return;
    }
    for (int j = 0; j + 1 < ny_; ++j) {
      for (int i = 0; i + 1 < nx_; ++i) {
        const int v00 = index(i, j), v10 = index(i + 1, j), v11 = index(i + 1, j + 1), v01 = index(i, j + 1);
        elements_.push_back(triangle(v00, v10, v11));
        elements_.push_back(triangle(v00, v11, v01));
      }
    }
  }

  Element triangle(int a, int b, int c) const {
    const Point pa = node(a), pb = node(b), pc = node(c);
    const double det = (pb.x - pa.x) * (pc.y - pa.y) - (pc.x - pa.x) * (pb.y - pa.y);
    Element e;
    e.count = 3;
    e.nodes = {a, b, c};
    e.measure = 0.5 * std::abs(det);
    // grad phi_a = (y_b - y_c, x_c - x_b) / det, cyclically.
    const std::array<Point, 3> p{pa, pb, pc};
    for (int k = 0; k < 3; ++k) {
      const Point& q1 = p[(k + 1) % 3];
      const Point& q2 = p[(k + 2) % 3];
      e.basis_grad[k] = GradVec((q1.y - q2.y) / det, (q2.x - q1.x) / det);
    }
    e.barycenter = {(pa.x + pb.x + pc.x) / 3.0, (pa.y + pb.y + pc.y) / 3.0};
    return e;
  }

  int dim_;
  int nx_, ny_;
  double lx_, ly_, ox_, oy_;
  std::vector<Element> elements_;
  std::vector<int> boundary_;
  std::vector<int> interior_;
  std::vector<char> is_boundary_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// One finite value per grid node.
class NodalField {
 public:
  NodalField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != grid_->node_count()) {
      throw Error(ErrorCode::CountMismatch, "field has " + std::to_string(values_.size()) + " values for " +
                                                std::to_string(grid_->node_count()) + " nodes");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidField, "non-finite nodal value");
    }
  }
  static NodalField constant(GridPtr grid, double c) {
    const int n = grid->node_count();
    return NodalField(std::move(grid), std::vector<double>(n, c));
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }
  double operator[](int k) const { return values_[k]; }
  double& operator[](int k) { return values_[k]; }
  int size() const { return static_cast<int>(values_.size()); }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

inline void require_same_grid(const Grid& a, const Grid& b) {
  if (!a.same_as(b)) throw Error(ErrorCode::GridMismatch, "fields live on different grids");
}

inline NodalField operator-(const NodalField& a, const NodalField& b) {
  require_same_grid(a.grid(), b.grid());
  std::vector<double> v(a.size());
  for (int k = 0; k < a.size(); ++k) v[k] = a[k] - b[k];
  return NodalField(a.grid_ptr(), std::move(v));
}

inline double max_abs_difference(const NodalField& a, const NodalField& b) {
  require_same_grid(a.grid(), b.grid());
  double m = 0.0;
  for (int k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

using ScalarFunction = std::function<double(const Point&)>;

/// Gradient of the linear interpolant on one element.
inline GradVec p1_gradient(const NodalField& field, const Element& e) {
  GradVec g = GradVec::zero(field.grid().dim());
  for (int k = 0; k < e.count; ++k) g += field[e.nodes[k]] * e.basis_grad[k];
  return g;
}
inline GradVec p1_gradient(const NodalField& field, int element) {
  const auto& elems = field.grid().elements();
  if (element < 0 || element >= static_cast<int>(elems.size())) {
    throw Error(ErrorCode::PreconditionViolated, "element index out of range");
  }
  return p1_gradient(field, elems[element]);
}

inline NodalField interpolate(const GridPtr& grid, const ScalarFunction& g) {
  std::vector<double> v(grid->node_count());
  for (int k = 0; k < grid->node_count(); ++k) {
    v[k] = g(grid->node(k));
    if (!std::isfinite(v[k])) {
      const Point p = grid->node(k);
      throw Error(ErrorCode::InvalidField,
                  "non-finite sample at (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
    }
  }
  return NodalField(grid, std::move(v));
}

/// Dirichlet datum: a closure on the boundary or explicit nodal values.
class BoundaryData {
 public:
  static BoundaryData from_function(ScalarFunction g) { return BoundaryData(std::move(g)); }
  /// Takes boundary values from a field; interior values are ignored.
  static BoundaryData from_field(const NodalField& f) {
    return BoundaryData(std::vector<double>(f.values().begin(), f.values().end()));
  }

  /// Full-length node vector; only boundary entries are meaningful.
  std::vector<double> nodal_values(const Grid& grid) const {
    std::vector<double> out(grid.node_count(), 0.0);
    if (const auto* g = std::get_if<ScalarFunction>(&source_)) {
      for (int k : grid.boundary_nodes()) out[k] = (*g)(grid.node(k));
    } else {
      const auto& vals = std::get<std::vector<double>>(source_);
      if (static_cast<int>(vals.size()) != grid.node_count()) {
        throw Error(ErrorCode::GridMismatch, "explicit boundary values sized for a different grid");
      }
      for (int k : grid.boundary_nodes()) out[k] = vals[k];
    }
    for (int k : grid.boundary_nodes()) {
      if (!std::isfinite(out[k])) throw Error(ErrorCode::InvalidField, "non-finite boundary value");
    }
    return out;
  }

  bool is_function() const { return std::holds_alternative<ScalarFunction>(source_); }

 private:
  explicit BoundaryData(ScalarFunction g) : source_(std::move(g)) {}
  explicit BoundaryData(std::vector<double> v) : source_(std::move(v)) {}
  std::variant<ScalarFunction, std::vector<double>> source_;
};

/// Transfinite (Coons) extension of boundary values into the interior; the
/// default initial guess of both solvers.
inline std::vector<double> boundary_extension(const Grid& grid, const std::vector<double>& bvals) {
  std::vector<double> u = bvals;
  const int nx = grid.nx(), ny = grid.ny();
  if (grid.dim() == 1) {
    const double a = bvals[0], b = bvals[nx - 1];
    for (int i = 1; i + 1 < nx; ++i) u[i] = a + (b - a) * i / (nx - 1.0);
    return u;
  }
  auto at = [&](int i, int j) { return bvals[grid.index(i, j)]; };
  for (int j = 1; j + 1 < ny; ++j) {
    const double t = j / (ny - 1.0);
    for (int i = 1; i + 1 < nx; ++i) {
      const double s = i / (nx - 1.0);
      const double lin = (1 - s) * at(0, j) + s * at(nx - 1, j) + (1 - t) * at(i, 0) + t * at(i, ny - 1);
      const double bil = (1 - s) * (1 - t) * at(0, 0) + s * (1 - t) * at(nx - 1, 0) + (1 - s) * t * at(0, ny - 1) +
                         s * t * at(nx - 1, ny - 1);
      u[grid.index(i, j)] = lin - bil;
    }
  }
  return u;
}

/// Nodal interpolation of a coarse field onto a grid covering the same domain
/// (piecewise linear on the coarse elements).
inline std::vector<double> prolongate(const NodalField& coarse, const Grid& fine) {
  const Grid& c = coarse.grid();
  std::vector<double> out(fine.node_count());
  for (int k = 0; k < fine.node_count(); ++k) {
    const Point p = fine.node(k);
    const double sx = std::clamp((p.x - c.ox()) / c.hx(), 0.0, c.nx() - 1.0);
    const int i = std::min(static_cast<int>(sx), c.nx() - 2);
    const double fx = sx - i;
    if (c.dim() == 1) {
      out[k] = (1 - fx) * coarse[i] + fx * coarse[i + 1];
      continue;
    }
    const double sy = std::clamp((p.y - c.oy()) / c.hy(), 0.0, c.ny() - 1.0);
    const int j = std::min(static_cast<int>(sy), c.ny() - 2);
    const double fy = sy - j;
    const double v00 = coarse[c.index(i, j)], v10 = coarse[c.index(i + 1, j)];
    const double v01 = coarse[c.index(i, j + 1)], v11 = coarse[c.index(i + 1, j + 1)];
    // Lower-right triangle (fx >= fy) or upper-left, matching the diagonal split.
    out[k] = fx >= fy ? v00 + fx * (v10 - v00) + fy * (v11 - v10) : v00 + fy * (v01 - v00) + fx * (v11 - v01);
  }
  return out;
}

}  // namespace dphase
