#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pmhom/assembly.hpp"
#include "pmhom/error.hpp"
#include "pmhom/grid.hpp"
#include "pmhom/linear_solvers.hpp"
#include "pmhom/norms.hpp"
#include "pmhom/sparse.hpp"

namespace pmhom {
namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Tensor> uniform_samples(const Grid& g, const Tensor& a) {
  return sample_at_quadrature(g, [&](const QuadraturePoint&) { return a; });
}

// Random symmetric tensor with eigenvalues in [lo, hi].
Tensor random_spd(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> eig(lo, hi), ang(0.0, kPi);
  const double l1 = eig(rng), l2 = eig(rng), t = ang(rng);
  const double c = std::cos(t), s = std::sin(t);
  return Tensor::symmetric(l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c);
}

TEST(BuildGrid, PeriodicLineHasOneDofPerCell) {
  const auto g = build_grid(1, 8, BoundaryKind::periodic, 1.0);
  EXPECT_EQ(g.dof_count(), 8u);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.125);
}

TEST(BuildGrid, DirichletSquareKeepsInteriorNodes) {
  const auto g = build_grid(2, 4, BoundaryKind::dirichlet, 1.0);
  EXPECT_EQ(g.dof_count(), 9u);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.25);
}

TEST(BuildGrid, RejectsBadArguments) {
  EXPECT_THROW(build_grid(3, 8, BoundaryKind::periodic, 1.0), InvalidArgument);
  EXPECT_THROW(build_grid(1, 1, BoundaryKind::periodic, 1.0), InvalidArgument);
  EXPECT_THROW(build_grid(2, 4, BoundaryKind::dirichlet, 0.0), InvalidArgument);
  EXPECT_THROW(build_grid(2, 4, BoundaryKind::dirichlet, -1.0), InvalidArgument);
}

TEST(BuildGrid, SpacingTimesCellsIsSide) {
  for (int n : {2, 3, 7, 64, 100}) {
    const auto g = build_grid(2, n, BoundaryKind::dirichlet, 2.5);
    EXPECT_EQ(g.spacing() * n, 2.5);
    EXPECT_EQ(g.dof_count(), static_cast<std::size_t>((n - 1) * (n - 1)));
  }
}

TEST(Stiffness, PeriodicLineIsCirculant) {
  const auto g = build_grid(1, 4, BoundaryKind::periodic, 1.0);
  const auto k = assemble_stiffness(g, uniform_samples(g, Tensor::identity(1)));
  const double h = 0.25;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(k.entry(i, i), 2.0 / h, 1e-12);
    EXPECT_NEAR(k.entry(i, (i + 1) % 4), -1.0 / h, 1e-12);
    EXPECT_NEAR(k.entry(i, (i + 3) % 4), -1.0 / h, 1e-12);
    EXPECT_EQ(k.entry(i, (i + 2) % 4), 0.0);
  }
  EXPECT_EQ(k.constraint(), ConstraintTag::zero_mean);
}

TEST(Stiffness, PeriodicOperatorAnnihilatesConstants) {
  for (int dim : {1, 2}) {
    const auto g = build_grid(dim, 16, BoundaryKind::periodic, 1.0);
    const auto k = assemble_stiffness(g, uniform_samples(g, Tensor::identity(dim)));
    const std::vector<double> ones(g.dof_count(), 1.0);
    EXPECT_LT(norm_inf(k.apply(ones)), 1e-12);
  }
}

TEST(Stiffness, DirichletLineIsTridiagonal) {
  const auto g = build_grid(1, 4, BoundaryKind::dirichlet, 1.0);
  const auto k = assemble_stiffness(g, uniform_samples(g, Tensor::identity(1)));
  ASSERT_EQ(k.size(), 3u);
  const double h = 0.25;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(k.entry(i, i), 2.0 / h, 1e-12);
    if (i + 1 < 3) EXPECT_NEAR(k.entry(i, i + 1), -1.0 / h, 1e-12);
    if (i > 0) EXPECT_NEAR(k.entry(i, i - 1), -1.0 / h, 1e-12);
  }
  EXPECT_EQ(k.entry(0, 2), 0.0);
}

TEST(Stiffness, RejectsAsymmetricSample) {
  const auto g = build_grid(2, 4, BoundaryKind::periodic, 1.0);
  Tensor a = Tensor::identity(2);
  a(0, 1) = 0.3;
  a(1, 0) = 0.1;
  EXPECT_THROW(assemble_stiffness(g, uniform_samples(g, a)), InvalidArgument);
}

TEST(Stiffness, RandomCoefficientsGiveSymmetricOperator) {
  std::mt19937_64 rng(7);
  for (auto kind : {BoundaryKind::periodic, BoundaryKind::dirichlet}) {
    const auto g = build_grid(2, 12, kind, 1.0);
    const auto samples =
        sample_at_quadrature(g, [&](const QuadraturePoint&) { return random_spd(rng, 0.2, 1.0); });
    const auto k = assemble_stiffness(g, samples);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
      for (std::size_t j = 0; j < k.size(); ++j) {
        worst = std::max(worst, std::abs(k.entry(i, j) - k.entry(j, i)));
        scale = std::max(scale, std::abs(k.entry(i, j)));
      }
    EXPECT_LE(worst, 1e-12 * scale);
  }
}

TEST(Stiffness, SpectralSandwichOnRandomVectors) {
  std::mt19937_64 rng(11);
  const double lambda = 0.25;
  const auto g = build_grid(2, 10, BoundaryKind::dirichlet, 1.0);
  const auto samples = sample_at_quadrature(
      g, [&](const QuadraturePoint&) { return random_spd(rng, lambda, 1.0); });
  const auto k = assemble_stiffness(g, samples);
  const auto laplace = assemble_stiffness(g, uniform_samples(g, Tensor::identity(2)));
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(g.dof_count());
    for (auto& x : v) x = gauss(rng);
    const double q = k.quadratic_form(v), q0 = laplace.quadratic_form(v);
    EXPECT_GE(q, lambda * q0 * (1.0 - 1e-12));
    EXPECT_LE(q, q0 * (1.0 + 1e-12));
  }
}

TEST(SolveSpd, IdentityReturnsRhs) {
  const auto id = SparseOperator::identity(5);
  const std::vector<double> b{1.0, -2.0, 3.0, 0.5, 4.0};
  const auto res = solve_spd(id, b);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(res.x[i], b[i], 1e-14);
}

double periodic_poisson_error(int n) {
  const auto g = build_grid(1, n, BoundaryKind::periodic, 1.0);
  const auto k = assemble_stiffness(g, uniform_samples(g, Tensor::identity(1)));
  const auto f = interpolate(g, [](const Point& y) { return std::sin(2.0 * kPi * y[0]); });
  const auto mass = lumped_mass(g);
  std::vector<double> b(g.dof_count());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = mass[i] * f[i];
  const auto res = solve_spd(k, b, {1e-13, 0});
  std::vector<double> err(g.dof_count());
  for (std::size_t i = 0; i < err.size(); ++i)
    err[i] = res.x[i] - std::sin(2.0 * kPi * g.dof_position(i)[0]) / (4.0 * kPi * kPi);
  return norm(ScalarField(g, err), NormSpec::lp(2.0));
}

TEST(SolveSpd, PeriodicPoissonConvergesAtSecondOrder) {
  double prev = periodic_poisson_error(16);
  for (int n : {32, 64, 128, 256}) {
    const double e = periodic_poisson_error(n);
    EXPECT_GE(prev / e, 3.5) << "n = " << n;
    prev = e;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(SolveSpd, ZeroMeanSolutionAndResidual) {
  std::mt19937_64 rng(3);
  const auto g = build_grid(2, 16, BoundaryKind::periodic, 1.0);
  const auto samples =
      sample_at_quadrature(g, [&](const QuadraturePoint&) { return random_spd(rng, 0.3, 1.0); });
  const auto k = assemble_stiffness(g, samples);
  std::normal_distribution<double> gauss;
  std::vector<double> b(g.dof_count());
  for (auto& x : b) x = gauss(rng);
  project_zero_mean(b);
  const double tol = 1e-10;
  const auto res = solve_spd(k, b, {tol, 0});
  double mean = 0.0;
  for (double x : res.x) mean += x;
  EXPECT_LE(std::abs(mean / res.x.size()), tol);
  auto r = k.apply(res.x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  EXPECT_LE(norm2(r), tol * norm2(b));
}

TEST(SolveSpd, UnreachableToleranceThrows) {
  const auto g = build_grid(1, 64, BoundaryKind::dirichlet, 1.0);
  const auto k = assemble_stiffness(g, uniform_samples(g, Tensor::identity(1)));
  std::vector<double> b(g.dof_count());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::sin(3.0 * static_cast<double>(i));
  EXPECT_THROW(solve_spd(k, b, {1e-12, 1}), SolverError);
}

TEST(Norm, ConstantOneHasUnitL2) {
  const auto g = build_grid(2, 8, BoundaryKind::periodic, 1.0);
  const auto one = interpolate(g, [](const Point&) { return 1.0; });
  EXPECT_NEAR(norm(one, NormSpec::lp(2.0)), 1.0, 1e-14);
  EXPECT_NEAR(norm(one, NormSpec::h1_semi()), 0.0, 1e-14);
}

TEST(Norm, SineInterpolantL2) {
  const auto g = build_grid(1, 256, BoundaryKind::periodic, 1.0);
  const auto f = interpolate(g, [](const Point& y) { return std::sin(2.0 * kPi * y[0]); });
  EXPECT_NEAR(norm(f, NormSpec::lp(2.0)), 1.0 / std::sqrt(2.0), 1e-3);
}

TEST(Norm, RejectsBadArguments) {
  const auto g = build_grid(1, 8, BoundaryKind::periodic, 1.0);
  const ScalarField f(g);
  EXPECT_THROW(norm(f, NormSpec::lp(0.5)), InvalidArgument);
  Box unaligned;
  unaligned.lo = {0.1, 0.0};
  unaligned.hi = {0.5, 0.0};
  EXPECT_THROW(norm(f, NormSpec::lp(2.0), unaligned), InvalidArgument);
}

TEST(Norm, SubdomainIsCellAligned) {
  const auto g = build_grid(1, 8, BoundaryKind::periodic, 1.0);
  const auto one = interpolate(g, [](const Point&) { return 1.0; });
  Box half;
  half.lo = {0.25, 0.0};
  half.hi = {0.75, 0.0};
  EXPECT_NEAR(norm(one, NormSpec::lp(2.0), half), std::sqrt(0.5), 1e-14);
}

}  // namespace
}  // namespace pmhom
