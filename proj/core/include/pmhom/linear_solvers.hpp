#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pmhom/sparse.hpp"

namespace pmhom {

struct SolverOptions {
  double tol = 1e-10;
  /// 0 selects 50 * dimension.
  int max_iter = 0;
};

struct SolveResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients for a symmetric positive (semi)definite
/// operator. Zero-mean tagged operators get the rhs, iterates and preconditioned residuals
/// projected onto the mean-free subspace. Converged when the true residual is below
/// tol * ||b|| or below the rounding level 64 eps || |A| |x| || of its own evaluation.
/// Throws SolverError when neither holds after max_iter iterations.
SolveResult solve_spd(const SparseOperator& op, std::span<const double> rhs,
                      const SolverOptions& options = {},
                      std::span<const double> initial_guess = {});

using LinearMap = std::function<void(std::span<const double>, std::span<double>)>;

struct GmresOptions {
  double tol = 1e-9;  // relative to ||rhs||
  int max_matvec = 200;
  int restart = 40;
};

/// Restarted GMRES(restart) for a general linear map. Returns the last iterate; the caller
/// inspects relative_residual (true residual) to decide convergence. `iterations` counts
/// applications of the map.
SolveResult gmres(const LinearMap& apply, std::span<const double> rhs,
                  const GmresOptions& options, std::span<const double> initial_guess = {});

}  // namespace pmhom
