#include "pmhom/norms.hpp"

#include <cmath>
#include <numeric>

#include "pmhom/assembly.hpp"
#include "pmhom/error.hpp"

namespace pmhom {

namespace {

std::vector<std::size_t> all_cells(const Grid& grid) {
  std::vector<std::size_t> c(grid.cell_count());
  std::iota(c.begin(), c.end(), std::size_t{0});
  return c;
}

constexpr int kMidpointSub = 4;

}  // namespace

std::vector<std::size_t> cells_in_box(const Grid& grid, const Box& box) {
  std::array<int, kMaxDim> lo{0, 0}, hi{1, 1};
  for (int d = 0; d < grid.dim(); ++d) {
    const double a = (box.lo[d] - grid.origin()[d]) / grid.spacing();
    const double b = (box.hi[d] - grid.origin()[d]) / grid.spacing();
    const double ra = std::round(a), rb = std::round(b);
    if (std::abs(a - ra) > 1e-9 || std::abs(b - rb) > 1e-9)
      throw InvalidArgument("subdomain is not aligned to grid cells");
    lo[d] = static_cast<int>(ra);
    hi[d] = static_cast<int>(rb);
    if (lo[d] < 0 || hi[d] > grid.cells_per_axis() || lo[d] >= hi[d])
      throw InvalidArgument("subdomain is empty or outside the grid domain");
  }
  std::vector<std::size_t> cells;
  const auto n = static_cast<std::size_t>(grid.cells_per_axis());
  for (int j = lo[1]; j < hi[1]; ++j)
    for (int i = lo[0]; i < hi[0]; ++i)
      cells.push_back(static_cast<std::size_t>(i) + (grid.dim() == 2 ? n * j : 0));
  return cells;
}

double gradient_energy(const ScalarField& field, const std::vector<std::size_t>& cells) {
  const Grid& g = field.grid();
  const int nq = gauss_points_per_cell(g.dim());
  double sum = 0.0;
  for (auto c : cells) {
    const auto pts = gauss_points(g, c);
    for (int q = 0; q < nq; ++q) {
      const Vec grad = field.cell_gradient(c, pts[q].local);
      sum += pts[q].weight * (grad[0] * grad[0] + grad[1] * grad[1]);
    }
  }
  return sum;
}

double norm(const ScalarField& field, const NormSpec& spec, const std::optional<Box>& subdomain) {
  const Grid& g = field.grid();
  const auto cells = subdomain ? cells_in_box(g, *subdomain) : all_cells(g);
  if (spec.kind == NormKind::h1_semi) return std::sqrt(gradient_energy(field, cells));
  if (!(spec.p >= 1.0) || !std::isfinite(spec.p))
    throw InvalidArgument("norm: exponent p must be >= 1");
  const double p = spec.p;
  const int dim = g.dim();
  double sum = 0.0;
  if (spec.rule == NormRule::nodal) {
    const double w = g.cell_measure() / g.local_nodes();
    for (auto c : cells) {
      const auto v = field.cell_values(c);
      for (int a = 0; a < g.local_nodes(); ++a) sum += w * std::pow(std::abs(v[a]), p);
    }
  } else if (p == 2.0) {
    const int nq = gauss_points_per_cell(dim);
    for (auto c : cells) {
      const auto pts = gauss_points(g, c);
      const auto v = field.cell_values(c);
      for (int q = 0; q < nq; ++q) {
        const auto shape = q1_shape(dim, pts[q].local, g.spacing());
        double u = 0.0;
        for (int a = 0; a < g.local_nodes(); ++a) u += shape.value[a] * v[a];
        sum += pts[q].weight * u * u;
      }
    }
  } else {
    const int ny = dim == 2 ? kMidpointSub : 1;
    const double w = g.cell_measure() / (kMidpointSub * ny);
    for (auto c : cells) {
      const auto v = field.cell_values(c);
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < kMidpointSub; ++i) {
          const Vec local{(i + 0.5) / kMidpointSub, dim == 2 ? (j + 0.5) / kMidpointSub : 0.0};
          const auto shape = q1_shape(dim, local, g.spacing());
          double u = 0.0;
          for (int a = 0; a < g.local_nodes(); ++a) u += shape.value[a] * v[a];
          sum += w * std::pow(std::abs(u), p);
        }
    }
  }
  return std::pow(sum, 1.0 / p);
}

}  // namespace pmhom
