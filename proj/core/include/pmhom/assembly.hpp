#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pmhom/grid.hpp"
#include "pmhom/sparse.hpp"

namespace pmhom {

/// A tensor-product Gauss point of a cell: 2 points per axis, 2^dim per cell.
struct QuadraturePoint {
  std::size_t cell;
  int index;     // 0 .. 2^dim - 1 within the cell
  Vec local;     // reference coordinates in [0,1]^dim
  Point x;       // physical coordinates
  double weight; // includes the cell measure
};

int gauss_points_per_cell(int dim);
std::array<QuadraturePoint, 4> gauss_points(const Grid& grid, std::size_t cell);

/// Calls f(QuadraturePoint) for every Gauss point of every cell, cell-major.
template <class F>
void for_each_gauss_point(const Grid& grid, F&& f) {
  const int nq = gauss_points_per_cell(grid.dim());
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const auto pts = gauss_points(grid, c);
    for (int q = 0; q < nq; ++q) f(pts[q]);
  }
}

using CoefficientSampler = std::function<Tensor(const QuadraturePoint&)>;

/// Coefficient samples at all Gauss points, indexed cell * 2^dim + q.
std::vector<Tensor> sample_at_quadrature(const Grid& grid, const CoefficientSampler& sampler);

/// Q1 Galerkin matrix of -div(a grad .). Periodic grids are tagged zero-mean. Throws
/// InvalidArgument if a sample's symmetry defect exceeds 1e-12 relative to its entries.
SparseOperator assemble_stiffness(const Grid& grid, std::span<const Tensor> samples);
SparseOperator assemble_stiffness(const Grid& grid, const CoefficientSampler& sampler);

/// b_i = integral of (a e) . grad(phi_i) for a constant direction e.
std::vector<double> assemble_flux_load(const Grid& grid, std::span<const Tensor> samples,
                                       const Vec& direction);

/// Row sums of the Q1 mass matrix (trapezoidal lumping).
std::vector<double> lumped_mass(const Grid& grid);

}  // namespace pmhom
