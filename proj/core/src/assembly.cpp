#include "pmhom/assembly.hpp"

#include <cmath>
#include <sstream>

#include "pmhom/error.hpp"

namespace pmhom {

namespace {

constexpr double kGaussOffset = 0.28867513459481288225;  // 1/(2 sqrt 3)
constexpr std::array<double, 2> kGauss1d{0.5 - kGaussOffset, 0.5 + kGaussOffset};

void check_samples(const Grid& grid, std::span<const Tensor> samples) {
  const auto expected = grid.cell_count() * static_cast<std::size_t>(gauss_points_per_cell(grid.dim()));
  if (samples.size() != expected)
    throw InvalidArgument("coefficient samples: expected " + std::to_string(expected) +
                          ", got " + std::to_string(samples.size()));
}

}  // namespace

int gauss_points_per_cell(int dim) { return dim == 1 ? 2 : 4; }

std::array<QuadraturePoint, 4> gauss_points(const Grid& grid, std::size_t cell) {
  std::array<QuadraturePoint, 4> pts{};
  const Point o = grid.cell_origin(cell);
  const double h = grid.spacing();
  const int nq = gauss_points_per_cell(grid.dim());
  const double w = grid.cell_measure() / nq;
  for (int q = 0; q < nq; ++q) {
    QuadraturePoint& p = pts[q];
    p.cell = cell;
    p.index = q;
    p.local = {kGauss1d[q % 2], grid.dim() == 2 ? kGauss1d[q / 2] : 0.0};
    p.x = {o[0] + h * p.local[0], grid.dim() == 2 ? o[1] + h * p.local[1] : 0.0};
    p.weight = w;
  }
  return pts;
}

std::vector<Tensor> sample_at_quadrature(const Grid& grid, const CoefficientSampler& sampler) {
  std::vector<Tensor> out;
  out.reserve(grid.cell_count() * static_cast<std::size_t>(gauss_points_per_cell(grid.dim())));
  for_each_gauss_point(grid, [&](const QuadraturePoint& qp) { out.push_back(sampler(qp)); });
  return out;
}

SparseOperator assemble_stiffness(const Grid& grid, std::span<const Tensor> samples) {
  check_samples(grid, samples);
  const int dim = grid.dim();
  const int nloc = grid.local_nodes();
  const int nq = gauss_points_per_cell(dim);
  std::vector<Triplet> triplets;
  triplets.reserve(grid.cell_count() * static_cast<std::size_t>(nloc * nloc));
  std::size_t s = 0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const auto pts = gauss_points(grid, c);
    const auto dofs = grid.cell_dofs(c);
    double ke[4][4] = {};
    for (int q = 0; q < nq; ++q, ++s) {
      const Tensor& a = samples[s];
      if (a.symmetry_defect(dim) > 1e-12 * std::max(1.0, a.max_abs(dim))) {
        std::ostringstream msg;
        msg << "assemble_stiffness: asymmetric coefficient sample at cell " << c
            << ", point " << q << " (defect " << a.symmetry_defect(dim) << ")";
        throw InvalidArgument(msg.str());
      }
      const auto shape = q1_shape(dim, pts[q].local, grid.spacing());
      for (int i = 0; i < nloc; ++i) {
        const Vec agi = a.apply(shape.grad[i]);
        for (int j = 0; j < nloc; ++j)
          ke[i][j] += pts[q].weight * (agi[0] * shape.grad[j][0] + agi[1] * shape.grad[j][1]);
      }
    }
    for (int i = 0; i < nloc; ++i) {
      if (dofs[i] < 0) continue;
      for (int j = 0; j < nloc; ++j) {
        if (dofs[j] < 0) continue;
        triplets.push_back({static_cast<std::size_t>(dofs[i]), static_cast<std::size_t>(dofs[j]),
                            ke[i][j]});
      }
    }
  }
  const auto tag =
      grid.boundary() == BoundaryKind::periodic ? ConstraintTag::zero_mean : ConstraintTag::none;
  return SparseOperator::from_triplets(grid.dof_count(), std::move(triplets), tag);
}

SparseOperator assemble_stiffness(const Grid& grid, const CoefficientSampler& sampler) {
  const auto samples = sample_at_quadrature(grid, sampler);
  return assemble_stiffness(grid, samples);
}

std::vector<double> assemble_flux_load(const Grid& grid, std::span<const Tensor> samples,
                                       const Vec& direction) {
  check_samples(grid, samples);
  const int dim = grid.dim();
  const int nq = gauss_points_per_cell(dim);
  std::vector<double> b(grid.dof_count(), 0.0);
  std::size_t s = 0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const auto pts = gauss_points(grid, c);
    const auto dofs = grid.cell_dofs(c);
    for (int q = 0; q < nq; ++q, ++s) {
      const Vec flux = samples[s].apply(direction);
      const auto shape = q1_shape(dim, pts[q].local, grid.spacing());
      for (int i = 0; i < grid.local_nodes(); ++i) {
        if (dofs[i] < 0) continue;
        b[static_cast<std::size_t>(dofs[i])] +=
            pts[q].weight * (flux[0] * shape.grad[i][0] + flux[1] * shape.grad[i][1]);
      }
    }
  }
  return b;
}

std::vector<double> lumped_mass(const Grid& grid) {
  std::vector<double> m(grid.dof_count(), 0.0);
  const double share = grid.cell_measure() / grid.local_nodes();
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const auto dofs = grid.cell_dofs(c);
    for (int i = 0; i < grid.local_nodes(); ++i)
      if (dofs[i] >= 0) m[static_cast<std::size_t>(dofs[i])] += share;
  }
  return m;
}

}  // namespace pmhom
