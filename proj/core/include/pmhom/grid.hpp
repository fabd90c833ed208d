#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace pmhom {

inline constexpr int kMaxDim = 2;

/// Point or vector in R^dim; unused trailing components are zero.
using Vec = std::array<double, kMaxDim>;
using Point = Vec;
using NodeIndex = std::array<int, kMaxDim>;

/// Small dense matrix acting on R^dim (only the leading dim x dim block is meaningful).
struct Tensor {
  std::array<std::array<double, kMaxDim>, kMaxDim> v{};

  static Tensor identity(int dim);
  static Tensor diagonal(double a11, double a22);
  static Tensor symmetric(double a11, double a12, double a22);

  double operator()(int i, int j) const { return v[i][j]; }
  double& operator()(int i, int j) { return v[i][j]; }

  Vec apply(const Vec& x) const {
    return {v[0][0] * x[0] + v[0][1] * x[1], v[1][0] * x[0] + v[1][1] * x[1]};
  }
  Tensor scaled(double f) const;
  Tensor transposed() const;
  Tensor symmetrized() const;
  /// max |a_ij - a_ji| over the leading block.
  double symmetry_defect(int dim) const;
  double max_abs(int dim) const;

  friend Tensor operator+(const Tensor& a, const Tensor& b);
  friend Tensor operator-(const Tensor& a, const Tensor& b);
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Extreme eigenvalues of the symmetric part of the leading dim x dim block.
struct EigenRange {
  double min;
  double max;
};
EigenRange eigen_range(const Tensor& a, int dim);

enum class BoundaryKind { periodic, dirichlet };

/// Axis-aligned box [lo, hi] (only the first dim components are used).
struct Box {
  Point lo{};
  Point hi{};
};

/// Uniform tensor-product mesh on a box of side L, with Q1 degrees of freedom.
///
/// Nodes carry multi-indices in [0, n]^dim. Periodic grids identify index n with 0 so
/// they have n^dim DOFs; Dirichlet grids drop the boundary nodes and keep (n-1)^dim.
class Grid {
 public:
  Grid() = default;

  int dim() const { return dim_; }
  int cells_per_axis() const { return n_; }
  double spacing() const { return h_; }
  double side_length() const { return side_; }
  const Point& origin() const { return origin_; }
  BoundaryKind boundary() const { return kind_; }
  Box domain() const;

  std::size_t dof_count() const { return dofs_; }
  std::size_t cell_count() const { return cells_; }
  int dofs_per_axis() const { return kind_ == BoundaryKind::periodic ? n_ : n_ - 1; }
  int local_nodes() const { return dim_ == 1 ? 2 : 4; }
  double cell_measure() const { return dim_ == 1 ? h_ : h_ * h_; }

  /// DOF of a node; -1 for constrained (Dirichlet boundary) nodes.
  std::ptrdiff_t dof_of_node(NodeIndex node) const;
  /// Node multi-index of a DOF (the representative in [0,n) for periodic grids).
  NodeIndex node_of_dof(std::size_t dof) const;
  Point node_position(NodeIndex node) const;
  Point dof_position(std::size_t dof) const { return node_position(node_of_dof(dof)); }

  NodeIndex cell_index(std::size_t cell) const;
  Point cell_origin(std::size_t cell) const;
  /// DOFs of the cell's corners in lexicographic order (x fastest); -1 for constrained.
  std::array<std::ptrdiff_t, 4> cell_dofs(std::size_t cell) const;

  /// Cell containing p and reference coordinates in [0,1]^dim. Periodic grids wrap p;
  /// Dirichlet grids clamp it to the domain.
  struct Location {
    std::size_t cell;
    Vec local;
  };
  Location locate(const Point& p) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  friend Grid build_grid(int, int, BoundaryKind, double, Point);
  int dim_ = 1;
  int n_ = 0;
  double h_ = 0.0;
  double side_ = 0.0;
  Point origin_{};
  BoundaryKind kind_ = BoundaryKind::periodic;
  std::size_t dofs_ = 0;
  std::size_t cells_ = 0;
};

/// Throws InvalidArgument for dim outside {1,2}, n < 2 or side <= 0.
Grid build_grid(int dim, int n, BoundaryKind kind, double side_length, Point origin = {0.0, 0.0});

/// Q1 basis values and reference gradients at a reference point.
struct ShapeValues {
  std::array<double, 4> value{};
  std::array<Vec, 4> grad{};  // with respect to physical coordinates
};
ShapeValues q1_shape(int dim, const Vec& local, double h);

/// Nodal Q1 field on a grid; constrained nodes read as zero.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(Grid grid);
  ScalarField(Grid grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double node_value(NodeIndex node) const;
  std::array<double, 4> cell_values(std::size_t cell) const;
  double interpolate(const Point& p) const;
  Vec gradient(const Point& p) const;
  Vec cell_gradient(std::size_t cell, const Vec& local) const;
  double max_value() const;
  double min_value() const;
  double mean() const;

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Nodal interpolant of f on the grid's DOFs.
template <class F>
ScalarField interpolate(const Grid& grid, F&& f) {
  ScalarField out(grid);
  for (std::size_t d = 0; d < grid.dof_count(); ++d) out[d] = f(grid.dof_position(d));
  return out;
}

}  // namespace pmhom
