#include "pmhom/linear_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pmhom/error.hpp"

namespace pmhom {

namespace {

void residual(const SparseOperator& op, std::span<const double> b, std::span<const double> x,
              std::span<double> r) {
  op.apply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
}

// Size of the rounding error made when evaluating b - A x: ~ eps * || |A| |x| ||.
double residual_floor(const SparseOperator& op, std::span<const double> x) {
  const auto rows = op.row_offsets();
  const auto cols = op.columns();
  const auto vals = op.values();
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = rows[i]; k < rows[i + 1]; ++k) acc += std::abs(vals[k] * x[cols[k]]);
    sum += acc * acc;
  }
  return 64.0 * std::numeric_limits<double>::epsilon() * std::sqrt(sum);
}

}  // namespace

SolveResult solve_spd(const SparseOperator& op, std::span<const double> rhs,
                      const SolverOptions& options, std::span<const double> initial_guess) {
  const std::size_t n = op.size();
  if (rhs.size() != n) throw InvalidArgument("solve_spd: rhs length does not match operator");
  if (!initial_guess.empty() && initial_guess.size() != n)
    throw InvalidArgument("solve_spd: initial guess length does not match operator");
  const bool zero_mean = op.constraint() == ConstraintTag::zero_mean;
  const int max_iter = options.max_iter > 0 ? options.max_iter : static_cast<int>(50 * n);

  std::vector<double> b(rhs.begin(), rhs.end());
  if (zero_mean) project_zero_mean(b);
  SolveResult result;
  result.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return result;
  if (!initial_guess.empty()) {
    result.x.assign(initial_guess.begin(), initial_guess.end());
    if (zero_mean) project_zero_mean(result.x);
  }

  std::vector<double> inv_diag = op.diagonal();
  for (double& d : inv_diag) d = d > 0.0 ? 1.0 / d : 1.0;

  std::vector<double> r(n), z(n), p(n), ap(n);
  auto& x = result.x;
  int it = 0;
  double rel = 0.0;
  bool breakdown = false;
  bool at_floor = false;
  // Outer loop restarts from the true residual so the reported residual is never the
  // recursively updated one.
  while (true) {
    residual(op, b, x, r);
    if (zero_mean) project_zero_mean(r);
    rel = norm2(r) / bnorm;
    const double floor = residual_floor(op, x);
    at_floor = norm2(r) <= floor;
    if (rel <= options.tol || at_floor || it >= max_iter) break;
    const double stop = std::max(0.5 * options.tol * bnorm, floor);
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    if (zero_mean) project_zero_mean(z);
    p = z;
    double rz = dot(r, z);
    while (it < max_iter) {
      op.apply(p, ap);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) {
        breakdown = true;
        break;
      }
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      ++it;
      if (norm2(r) <= stop) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      if (zero_mean) project_zero_mean(z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (zero_mean) project_zero_mean(x);
    if (breakdown) {
      residual(op, b, x, r);
      if (zero_mean) project_zero_mean(r);
      rel = norm2(r) / bnorm;
      at_floor = norm2(r) <= residual_floor(op, x);
      break;
    }
  }
  if (zero_mean) project_zero_mean(x);
  result.iterations = it;
  result.relative_residual = rel;
  if (rel > options.tol && !at_floor) {
    std::ostringstream msg;
    msg << "solve_spd: no convergence after " << it << " iterations (relative residual "
        << rel << ", tolerance " << options.tol << ")";
    throw SolverError(msg.str(), rel, it);
  }
  return result;
}

SolveResult gmres(const LinearMap& apply, std::span<const double> rhs,
                  const GmresOptions& options, std::span<const double> initial_guess) {
  const std::size_t n = rhs.size();
  SolveResult result;
  result.x.assign(n, 0.0);
  if (!initial_guess.empty()) result.x.assign(initial_guess.begin(), initial_guess.end());
  const double bnorm = norm2(rhs);
  if (bnorm == 0.0 && initial_guess.empty()) return result;
  const double scale = bnorm > 0.0 ? bnorm : 1.0;
  const int m = std::max(1, options.restart);

  std::vector<double> r(n), w(n);
  auto true_residual = [&] {
    apply(result.x, w);
    ++result.iterations;
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - w[i];
    result.relative_residual = norm2(r) / scale;
  };
  if (initial_guess.empty()) {
    r.assign(rhs.begin(), rhs.end());
    result.relative_residual = bnorm / scale;
  } else {
    true_residual();
  }

  while (result.relative_residual > options.tol && result.iterations < options.max_matvec) {
    const double beta = norm2(r);
    std::vector<std::vector<double>> v;
    v.reserve(m + 1);
    v.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / beta;
    std::vector<std::vector<double>> h(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m), sn(m), g(m + 1, 0.0);
    g[0] = beta;
    int k = 0;
    for (; k < m && result.iterations < options.max_matvec; ++k) {
      apply(v[k], w);
      ++result.iterations;
      for (int j = 0; j <= k; ++j) {  // modified Gram-Schmidt
        h[j][k] = dot(w, v[j]);
        for (std::size_t i = 0; i < n; ++i) w[i] -= h[j][k] * v[j][i];
      }
      h[k + 1][k] = norm2(w);
      v.emplace_back(n);
      if (h[k + 1][k] > 0.0)
        for (std::size_t i = 0; i < n; ++i) v[k + 1][i] = w[i] / h[k + 1][k];
      for (int j = 0; j < k; ++j) {
        const double t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
        h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
        h[j][k] = t;
      }
      const double denom = std::hypot(h[k][k], h[k + 1][k]);
      cs[k] = denom > 0.0 ? h[k][k] / denom : 1.0;
      sn[k] = denom > 0.0 ? h[k + 1][k] / denom : 0.0;
      h[k][k] = denom;
      h[k + 1][k] = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      if (std::abs(g[k + 1]) <= 0.5 * options.tol * scale) {
        ++k;
        break;
      }
    }
    std::vector<double> yk(k, 0.0);
    for (int j = k - 1; j >= 0; --j) {
      double s = g[j];
      for (int l = j + 1; l < k; ++l) s -= h[j][l] * yk[l];
      yk[j] = h[j][j] != 0.0 ? s / h[j][j] : 0.0;
    }
    for (int j = 0; j < k; ++j)
      for (std::size_t i = 0; i < n; ++i) result.x[i] += yk[j] * v[j][i];
    true_residual();
  }
  return result;
}

}  // namespace pmhom
