#include "pmhom/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pmhom/error.hpp"

namespace pmhom {

Tensor Tensor::identity(int dim) { return dim == 1 ? diagonal(1.0, 0.0) : diagonal(1.0, 1.0); }

Tensor Tensor::diagonal(double a11, double a22) {
  Tensor t;
  t.v[0][0] = a11;
  t.v[1][1] = a22;
  return t;
}

Tensor Tensor::symmetric(double a11, double a12, double a22) {
  Tensor t;
  t.v[0][0] = a11;
  t.v[0][1] = a12;
  t.v[1][0] = a12;
  t.v[1][1] = a22;
  return t;
}

Tensor Tensor::scaled(double f) const {
  Tensor t;
  for (int i = 0; i < kMaxDim; ++i)
    for (int j = 0; j < kMaxDim; ++j) t.v[i][j] = f * v[i][j];
  return t;
}

Tensor Tensor::transposed() const {
  Tensor t;
  for (int i = 0; i < kMaxDim; ++i)
    for (int j = 0; j < kMaxDim; ++j) t.v[i][j] = v[j][i];
  return t;
}

Tensor Tensor::symmetrized() const {
  Tensor t = *this;
  t.v[0][1] = t.v[1][0] = 0.5 * (v[0][1] + v[1][0]);
  return t;
}

double Tensor::symmetry_defect(int dim) const {
  return dim == 1 ? 0.0 : std::abs(v[0][1] - v[1][0]);
}

double Tensor::max_abs(int dim) const {
  double m = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m = std::max(m, std::abs(v[i][j]));
  return m;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  Tensor t;
  for (int i = 0; i < kMaxDim; ++i)
    for (int j = 0; j < kMaxDim; ++j) t.v[i][j] = a.v[i][j] + b.v[i][j];
  return t;
}

Tensor operator-(const Tensor& a, const Tensor& b) { return a + b.scaled(-1.0); }

EigenRange eigen_range(const Tensor& a, int dim) {
  if (dim == 1) return {a(0, 0), a(0, 0)};
  const double off = 0.5 * (a(0, 1) + a(1, 0));
  const double mid = 0.5 * (a(0, 0) + a(1, 1));
  const double rad = std::hypot(0.5 * (a(0, 0) - a(1, 1)), off);
  return {mid - rad, mid + rad};
}

Grid build_grid(int dim, int n, BoundaryKind kind, double side_length, Point origin) {
  if (dim < 1 || dim > kMaxDim)
    throw InvalidArgument("build_grid: unsupported dimension " + std::to_string(dim) +
                          " (expected 1 or 2)");
  if (n < 2) throw InvalidArgument("build_grid: need at least 2 cells per axis, got " +
                                   std::to_string(n));
  if (!(side_length > 0.0) || !std::isfinite(side_length))
    throw InvalidArgument("build_grid: side length must be positive");
  Grid g;
  g.dim_ = dim;
  g.n_ = n;
  g.side_ = side_length;
  g.h_ = side_length / n;
  g.origin_ = origin;
  if (dim == 1) g.origin_[1] = 0.0;
  g.kind_ = kind;
  const auto per_axis = static_cast<std::size_t>(g.dofs_per_axis());
  g.dofs_ = dim == 1 ? per_axis : per_axis * per_axis;
  g.cells_ = dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
  return g;
}

Box Grid::domain() const {
  Box b;
  for (int d = 0; d < dim_; ++d) {
    b.lo[d] = origin_[d];
    b.hi[d] = origin_[d] + side_;
  }
  return b;
}

std::ptrdiff_t Grid::dof_of_node(NodeIndex node) const {
  const int per_axis = dofs_per_axis();
  std::ptrdiff_t dof = 0;
  std::ptrdiff_t stride = 1;
  for (int d = 0; d < dim_; ++d) {
    int i = node[d];
    if (kind_ == BoundaryKind::periodic) {
      i %= n_;
      if (i < 0) i += n_;
    } else {
      if (i <= 0 || i >= n_) return -1;
      i -= 1;
    }
    dof += stride * i;
    stride *= per_axis;
  }
  return dof;
}

NodeIndex Grid::node_of_dof(std::size_t dof) const {
  const auto per_axis = static_cast<std::size_t>(dofs_per_axis());
  const int shift = kind_ == BoundaryKind::periodic ? 0 : 1;
  NodeIndex node{0, 0};
  node[0] = static_cast<int>(dof % per_axis) + shift;
  if (dim_ == 2) node[1] = static_cast<int>(dof / per_axis) + shift;
  return node;
}

Point Grid::node_position(NodeIndex node) const {
  Point p{0.0, 0.0};
  for (int d = 0; d < dim_; ++d) p[d] = origin_[d] + h_ * node[d];
  return p;
}

NodeIndex Grid::cell_index(std::size_t cell) const {
  NodeIndex c{0, 0};
  const auto n = static_cast<std::size_t>(n_);
  c[0] = static_cast<int>(cell % n);
  if (dim_ == 2) c[1] = static_cast<int>(cell / n);
  return c;
}

Point Grid::cell_origin(std::size_t cell) const { return node_position(cell_index(cell)); }

std::array<std::ptrdiff_t, 4> Grid::cell_dofs(std::size_t cell) const {
  const NodeIndex c = cell_index(cell);
  std::array<std::ptrdiff_t, 4> out{-1, -1, -1, -1};
  if (dim_ == 1) {
    out[0] = dof_of_node({c[0], 0});
    out[1] = dof_of_node({c[0] + 1, 0});
  } else {
    out[0] = dof_of_node({c[0], c[1]});
    out[1] = dof_of_node({c[0] + 1, c[1]});
    out[2] = dof_of_node({c[0], c[1] + 1});
    out[3] = dof_of_node({c[0] + 1, c[1] + 1});
  }
  return out;
}

Grid::Location Grid::locate(const Point& p) const {
  Location loc{0, {0.0, 0.0}};
  std::size_t stride = 1;
  for (int d = 0; d < dim_; ++d) {
    double t = (p[d] - origin_[d]) / h_;
    if (kind_ == BoundaryKind::periodic) {
      t -= n_ * std::floor(t / n_);
    } else {
      t = std::clamp(t, 0.0, static_cast<double>(n_));
    }
    int i = static_cast<int>(std::floor(t));
    i = std::clamp(i, 0, n_ - 1);
    loc.local[d] = std::clamp(t - i, 0.0, 1.0);
    loc.cell += stride * static_cast<std::size_t>(i);
    stride *= static_cast<std::size_t>(n_);
  }
  return loc;
}

ShapeValues q1_shape(int dim, const Vec& local, double h) {
  ShapeValues s;
  const double x = local[0];
  if (dim == 1) {
    s.value[0] = 1.0 - x;
    s.value[1] = x;
    s.grad[0] = {-1.0 / h, 0.0};
    s.grad[1] = {1.0 / h, 0.0};
    return s;
  }
  const double y = local[1];
  s.value = {(1 - x) * (1 - y), x * (1 - y), (1 - x) * y, x * y};
  s.grad[0] = {-(1 - y) / h, -(1 - x) / h};
  s.grad[1] = {(1 - y) / h, -x / h};
  s.grad[2] = {-y / h, (1 - x) / h};
  s.grad[3] = {y / h, x / h};
  return s;
}

ScalarField::ScalarField(Grid grid) : grid_(grid), values_(grid.dof_count(), 0.0) {}

ScalarField::ScalarField(Grid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.dof_count())
    throw InvalidArgument("ScalarField: " + std::to_string(values_.size()) +
                          " values for a grid with " + std::to_string(grid_.dof_count()) +
                          " DOFs");
  for (double v : values_)
    if (!std::isfinite(v)) throw InvalidArgument("ScalarField: non-finite value");
}

double ScalarField::node_value(NodeIndex node) const {
  const auto dof = grid_.dof_of_node(node);
  return dof < 0 ? 0.0 : values_[static_cast<std::size_t>(dof)];
}

std::array<double, 4> ScalarField::cell_values(std::size_t cell) const {
  const auto dofs = grid_.cell_dofs(cell);
  std::array<double, 4> out{};
  for (int a = 0; a < grid_.local_nodes(); ++a)
    out[a] = dofs[a] < 0 ? 0.0 : values_[static_cast<std::size_t>(dofs[a])];
  return out;
}

double ScalarField::interpolate(const Point& p) const {
  const auto loc = grid_.locate(p);
  const auto shape = q1_shape(grid_.dim(), loc.local, grid_.spacing());
  const auto vals = cell_values(loc.cell);
  double u = 0.0;
  for (int a = 0; a < grid_.local_nodes(); ++a) u += shape.value[a] * vals[a];
  return u;
}

Vec ScalarField::cell_gradient(std::size_t cell, const Vec& local) const {
  const auto shape = q1_shape(grid_.dim(), local, grid_.spacing());
  const auto vals = cell_values(cell);
  Vec g{0.0, 0.0};
  for (int a = 0; a < grid_.local_nodes(); ++a) {
    g[0] += shape.grad[a][0] * vals[a];
    g[1] += shape.grad[a][1] * vals[a];
  }
  return g;
}

Vec ScalarField::gradient(const Point& p) const {
  const auto loc = grid_.locate(p);
  return cell_gradient(loc.cell, loc.local);
}

double ScalarField::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double ScalarField::min_value() const {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double ScalarField::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) /
         static_cast<double>(values_.size());
}

}  // namespace pmhom
