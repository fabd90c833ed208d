#pragma once

#include <optional>
#include <vector>

#include "pmhom/grid.hpp"

namespace pmhom {

enum class NormKind { lp, h1_semi };

/// Quadrature for Lp norms.
///  - standard: 2-point Gauss per axis when p = 2 (exact for Q1 fields); for other p a
///    composite midpoint rule with 4 sub-intervals per cell axis.
///  - nodal: trapezoid rule on nodal values (the lumped-mass inner product).
enum class NormRule { standard, nodal };

struct NormSpec {
  NormKind kind = NormKind::lp;
  double p = 2.0;
  NormRule rule = NormRule::standard;

  static NormSpec lp(double p, NormRule rule = NormRule::standard) {
    return {NormKind::lp, p, rule};
  }
  static NormSpec h1_semi() { return {NormKind::h1_semi, 2.0, NormRule::standard}; }
};

/// Cells covered by a cell-aligned box inside the grid domain.
std::vector<std::size_t> cells_in_box(const Grid& grid, const Box& box);

/// Throws InvalidArgument for p < 1 or a box that is not cell-aligned.
double norm(const ScalarField& field, const NormSpec& spec,
            const std::optional<Box>& subdomain = std::nullopt);

/// Integral of the squared gradient over the given cells (Gauss, exact for Q1).
double gradient_energy(const ScalarField& field, const std::vector<std::size_t>& cells);

}  // namespace pmhom
