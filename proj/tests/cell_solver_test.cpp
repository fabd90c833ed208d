#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "pmhom/cell_solver.hpp"
#include "pmhom/error.hpp"

namespace pmhom {
namespace {

constexpr double kPi = std::numbers::pi;

Grid cell_grid(int dim, int n) { return build_grid(dim, n, BoundaryKind::periodic, 1.0); }

CoefficientField make(std::string_view family, std::vector<double> params, int dim) {
  return make_coefficient(family, params, dim);
}

std::vector<CellSolution> cp1_all(const CoefficientField& a, const Grid& g, int s_nodes) {
  std::vector<CellSolution> out;
  for (int k = 1; k <= a.dim(); ++k) out.push_back(solve_cp1(a, g, s_nodes, k));
  return out;
}

double max_abs_field(const CellSolution& sol) {
  double m = 0.0;
  for (const auto& f : sol.fields)
    for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

// Coefficient tabulated on a (y, s) lattice from a callable.
template <class F>
CoefficientField tabulate(int dim, int ny, int ns, F&& f) {
  TabulatedCoefficient t;
  t.dim = dim;
  t.y_points = {ny, dim == 2 ? ny : 1};
  t.s_points = ns;
  t.samples.resize(static_cast<std::size_t>(ny) * t.y_points[1] * ns);
  for (int l = 0; l < ns; ++l)
    for (int j = 0; j < t.y_points[1]; ++j)
      for (int i = 0; i < ny; ++i)
        t.samples[t.index(i, j, l)] =
            f(Point{static_cast<double>(i) / ny, static_cast<double>(j) / t.y_points[1]},
              static_cast<double>(l) / ns);
  return make_tabulated(std::move(t));
}

// (int_0^1 (int_0^1 a(y, s)^-1 dy)^-1 ds) by midpoint rules, for 1D fields.
double harmonic_then_arithmetic(const CoefficientField& a) {
  const int ny = 8192, ns = 64;
  double outer = 0.0;
  for (int l = 0; l < ns; ++l) {
    const double s = static_cast<double>(l) / ns;
    double inner = 0.0;
    for (int i = 0; i < ny; ++i) inner += 1.0 / a({(i + 0.5) / ny, 0.0}, s)(0, 0);
    outer += 1.0 / (inner / ny);
  }
  return outer / ns;
}

TEST(SolveCp1, ConstantCoefficientHasZeroCorrector) {
  const auto a = make("constant", {0.9, 0.2, 0.5}, 2);
  for (const auto& sol : cp1_all(a, cell_grid(2, 16), 4)) EXPECT_LT(max_abs_field(sol), 1e-12);
}

TEST(SolveCp1, LayeredGradientAtMaximizer) {
  const auto a = make("layered_sin", {2.0, 1.0, 1.0}, 1);
  const auto sol = solve_cp1(a, cell_grid(1, 256), 1, 1);
  // d_y Phi + 1 = sqrt(3) / (2 + sin 2 pi y); at y = 1/4 the coefficient is 3.
  const double expected = std::sqrt(3.0) / 3.0 - 1.0;
  EXPECT_NEAR(sol.corrector_gradient({0.25 + 0.5 / 256, 0.0}, 0.0)[0], expected, 1e-4);
}

TEST(SolveCp1, LayeredAcrossFirstAxisLeavesSecondDirectionFlat) {
  const auto a = make("layered_sin", {2.0, 1.0, 1.0}, 2);
  const auto sol = solve_cp1(a, cell_grid(2, 32), 2, 2);
  EXPECT_LT(max_abs_field(sol), 1e-10);
}

TEST(SolveCp1, FieldsHaveZeroMean) {
  const auto a = make("separable_sin", {2.0, 1.0, 1.0}, 2);
  for (const auto& sol : cp1_all(a, cell_grid(2, 24), 4))
    for (const auto& f : sol.fields) EXPECT_LE(std::abs(f.mean()), 1e-10);
}

TEST(SolveCp3, TimeIndependentMatchesCp1) {
  const auto a = make("checkerboard_smoothed", {5.0}, 2);
  const auto g = cell_grid(2, 24);
  for (int k = 1; k <= 2; ++k) {
    const auto c1 = solve_cp1(a, g, 1, k);
    const auto c3 = solve_cp3(a, g, 8, k);
    for (std::size_t i = 0; i < g.dof_count(); ++i)
      EXPECT_NEAR(c3.fields[0][i], c1.fields[0][i], 1e-9);
  }
}

TEST(SolveCp3, TemporalOscillationAveragesOut) {
  const auto a = tabulate(1, 16, 16, [](const Point&, double s) {
    return Tensor::diagonal(2.0 + std::sin(2.0 * kPi * s), 0.0);
  });
  const auto sol = solve_cp3(a, cell_grid(1, 32), 16, 1);
  EXPECT_LT(max_abs_field(sol), 1e-12);
}

TEST(SolveCp3, DirectionOutOfRange) {
  const auto a = make("constant", {1.0, 0.0, 1.0}, 2);
  EXPECT_THROW(solve_cp3(a, cell_grid(2, 8), 4, 3), InvalidArgument);
  EXPECT_THROW(solve_cp1(a, cell_grid(2, 8), 4, 0), InvalidArgument);
}

TEST(SolveCp2, ZeroThetaGivesZeroFields) {
  const auto a = make("separable_sin", {2.0, 1.0, 1.0}, 1);
  const auto sol = solve_cp2(a, 0.0, cell_grid(1, 32), 16, 1);
  EXPECT_EQ(max_abs_field(sol), 0.0);
}

TEST(SolveCp2, SteadyCoefficientMatchesCp1) {
  const auto a = make("layered_sin", {2.0, 1.0, 1.0}, 1);
  const auto g = cell_grid(1, 64);
  const auto sub = assemble_ahom(a, cp1_all(a, g, 1));
  std::vector<CellSolution> crit{solve_cp2(a, 1.0, g, 16, 1)};
  const auto m = assemble_ahom(a, crit);
  EXPECT_NEAR(m.value(0, 0), sub.value(0, 0), 1e-8);
}

TEST(SolveCp2, PeriodicityDefectWithinTolerance) {
  const auto a = make("separable_sin", {2.0, 1.0, 1.0}, 2);
  const auto sol = solve_cp2(a, 0.5, cell_grid(2, 16), 16, 1);
  EXPECT_LE(sol.periodicity_defect, 1e-9);
  for (const auto& f : sol.fields) EXPECT_LE(std::abs(f.mean()), 1e-10);
}

TEST(SolveCp2, TinyThetaWithOnePeriodFails) {
  const auto a = make("separable_sin", {2.0, 1.0, 1.0}, 1);
  CellSolveOptions opt;
  opt.max_periods = 1;
  EXPECT_THROW(solve_cp2(a, 1e-9, cell_grid(1, 32), 16, 1, opt), SolverError);
}

TEST(AssembleAhom, ConstantCoefficientIsReproduced) {
  const auto a = make("constant", {0.9, 0.2, 0.5}, 2);
  const auto m = assemble_ahom(a, cp1_all(a, cell_grid(2, 16), 2));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(m.unscaled()(i, j), a.unscaled({0, 0}, 0)(i, j), 1e-12);
}

TEST(AssembleAhom, LayeredHarmonicMean) {
  const auto a = make("layered_sin", {2.0, 1.0, 1.0}, 1);
  const auto m = assemble_ahom(a, cp1_all(a, cell_grid(1, 256), 1));
  EXPECT_NEAR(m.unscaled()(0, 0), std::sqrt(3.0), 1e-4);
}

TEST(AssembleAhom, LayeredMeshConvergence) {
  const auto a = make("layered_sin", {2.0, 1.0, 1.0}, 1);
  double prev = 0.0;
  for (int n : {32, 64, 128, 256, 512}) {
    const double err =
        std::abs(assemble_ahom(a, cp1_all(a, cell_grid(1, n), 1)).unscaled()(0, 0) - std::sqrt(3.0));
    if (prev > 0.0) EXPECT_GE(prev / err, 3.5) << "n = " << n;
    prev = err;
  }
}

TEST(AssembleAhom, DiagonalSeparableCoefficientGivesHarmonicMeans) {
  auto a1 = [](double y) { return 2.0 + std::sin(2.0 * kPi * y); };
  auto a2 = [](double y) { return 1.5 + std::cos(2.0 * kPi * y); };
  const int ny = 64;
  const auto a = tabulate(2, ny, 1, [&](const Point& y, double) {
    return Tensor::diagonal(a1(y[0]), a2(y[1]));
  });
  const auto m = assemble_ahom(a, cp1_all(a, cell_grid(2, 128), 1));
  // Harmonic means of the tabulated (piecewise linear) profiles.
  auto harmonic = [&](int axis) {
    const int fine = 1 << 16;
    double s = 0.0;
    for (int i = 0; i < fine; ++i) {
      Point y{0.0, 0.0};
      y[axis] = (i + 0.5) / fine;
      s += 1.0 / a.unscaled(y, 0.0)(axis, axis);
    }
    return fine / s;
  };
  EXPECT_NEAR(m.unscaled()(0, 0), harmonic(0), 2e-4);
  EXPECT_NEAR(m.unscaled()(1, 1), harmonic(1), 2e-4);
  EXPECT_NEAR(m.unscaled()(0, 1), 0.0, 1e-10);
}

TEST(AssembleAhom, DimensionOneOracle) {
  const std::vector<std::pair<std::string, std::vector<double>>> families{
      {"constant", {0.7}},
      {"layered_sin", {2.0, 1.0, 1.0}},
      {"separable_sin", {2.0, 1.0, 1.0}},
      {"checkerboard_smoothed", {5.0}},
  };
  for (const auto& [family, params] : families) {
    const auto a = make(family, params, 1);
    const auto m = assemble_ahom(a, cp1_all(a, cell_grid(1, 512), 16));
    EXPECT_NEAR(m.value(0, 0), harmonic_then_arithmetic(a), 1e-6) << family;
  }
}

TEST(AssembleAhom, RejectsMixedRegimesAndGrids) {
  const auto a = make("separable_sin", {2.0, 1.0, 1.0}, 2);
  const auto g = cell_grid(2, 8);
  std::vector<CellSolution> mixed{solve_cp1(a, g, 2, 1), solve_cp3(a, g, 2, 2)};
  EXPECT_THROW(assemble_ahom(a, mixed), InvalidArgument);
  std::vector<CellSolution> grids{solve_cp1(a, g, 2, 1), solve_cp1(a, cell_grid(2, 12), 2, 2)};
  EXPECT_THROW(assemble_ahom(a, grids), InvalidArgument);
  std::vector<CellSolution> missing{solve_cp1(a, g, 2, 1)};
  EXPECT_THROW(assemble_ahom(a, missing), InvalidArgument);
}

TEST(AssembleAhom, SymmetricWithinSpectralSandwich) {
  const std::vector<std::tuple<std::string, std::vector<double>, int>> families{
      {"layered_sin", {3.0, 2.0, 2.0}, 2},
      {"separable_sin", {2.0, 1.0, 2.0}, 2},
      {"checkerboard_smoothed", {10.0}, 2},
      {"constant", {0.9, 0.3, 0.4}, 2},
  };
  for (const auto& [family, params, dim] : families) {
    const auto a = make(family, params, dim);
    const auto g = cell_grid(dim, 32);
    for (auto solve : {+[](const CoefficientField& c, const Grid& gr, int k) {
                         return solve_cp1(c, gr, 8, k);
                       },
                       +[](const CoefficientField& c, const Grid& gr, int k) {
                         return solve_cp3(c, gr, 8, k);
                       },
                       +[](const CoefficientField& c, const Grid& gr, int k) {
                         return solve_cp2(c, 0.7, gr, 16, k);
                       }}) {
      std::vector<CellSolution> sols;
      for (int k = 1; k <= dim; ++k) sols.push_back(solve(a, g, k));
      const auto m = assemble_ahom(a, sols);
      EXPECT_LE(m.value.symmetry_defect(dim), 1e-10) << family;
      EXPECT_TRUE(spectral_sandwich(m, a.ellipticity(), 1e-6)) << family;
    }
  }
}

TEST(RegimeConsistency, TimeIndependentCoefficientAgreesAcrossRegimes) {
  const auto a = make("checkerboard_smoothed", {5.0}, 2);
  const auto g = cell_grid(2, 32);
  const auto sub = assemble_ahom(a, cp1_all(a, g, 4));
  std::vector<CellSolution> sup{solve_cp3(a, g, 4, 1), solve_cp3(a, g, 4, 2)};
  const auto super = assemble_ahom(a, sup);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(super.value(i, j), sub.value(i, j), 1e-10);
  for (double theta : {0.1, 1.0, 10.0}) {
    std::vector<CellSolution> crit{solve_cp2(a, theta, g, 16, 1), solve_cp2(a, theta, g, 16, 2)};
    const auto m = assemble_ahom(a, crit);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(m.value(i, j), sub.value(i, j), 1e-8);
  }
}

TEST(ThetaTable, EndpointsAndMonotoneInterpolation) {
  const auto a = make("separable_sin", {2.0, 1.0, 1.0}, 1);
  const auto g = cell_grid(1, 64);
  ThetaTableOptions opt;
  opt.nodes = 12;
  opt.s_steps = 32;
  const auto table = build_theta_table(a, g, opt);
  ASSERT_EQ(table.thetas().size(), 13u);
  EXPECT_EQ(table.thetas().front(), 0.0);
  EXPECT_NEAR(table.query(0.0).value(0, 0), arithmetic_mean(a, g, 32)(0, 0), 1e-8);
  const auto sub = assemble_ahom(a, cp1_all(a, g, 32));
  EXPECT_NEAR(table.query(1e3).value(0, 0), sub.value(0, 0), 0.02 * sub.value(0, 0));
  EXPECT_FALSE(table.query(1e3).clamped);
  EXPECT_TRUE(table.query(2e3).clamped);
  EXPECT_EQ(table.query(2e3).value, table.query(1e3).value);
  // Between two nodes the query stays within the bracketing values.
  const auto& th = table.thetas();
  for (std::size_t i = 1; i + 1 < th.size(); ++i) {
    const double mid = std::sqrt(th[i] * th[i + 1]);
    const double lo = std::min(table.matrices()[i].value(0, 0), table.matrices()[i + 1].value(0, 0));
    const double hi = std::max(table.matrices()[i].value(0, 0), table.matrices()[i + 1].value(0, 0));
    EXPECT_GE(table.query(mid).value(0, 0), lo - 1e-15);
    EXPECT_LE(table.query(mid).value(0, 0), hi + 1e-15);
  }
  EXPECT_LT(table.max_adjacent_distance(), 0.1);
}

TEST(ThetaTable, SteadyCoefficientIsFlatForPositiveTheta) {
  const auto a = make("layered_sin", {2.0, 1.0, 1.0}, 1);
  const auto g = cell_grid(1, 64);
  ThetaTableOptions opt;
  opt.nodes = 6;
  const auto table = build_theta_table(a, g, opt);
  const double ref = assemble_ahom(a, cp1_all(a, g, 1)).value(0, 0);
  for (std::size_t i = 1; i < table.thetas().size(); ++i)
    EXPECT_NEAR(table.matrices()[i].value(0, 0), ref, 1e-8) << "theta = " << table.thetas()[i];
}

TEST(ThetaTable, RejectsTooFewNodes) {
  const auto a = make("layered_sin", {2.0, 1.0, 1.0}, 1);
  ThetaTableOptions opt;
  opt.nodes = 2;
  EXPECT_THROW(build_theta_table(a, cell_grid(1, 16), opt), InvalidArgument);
}

TEST(Storage, CellSolutionsAndTableRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "pmhom_cell_roundtrip";
  std::filesystem::remove_all(dir);
  const auto a = make("separable_sin", {2.0, 1.0, 1.0}, 2);
  const auto g = cell_grid(2, 8);
  const auto sols = cp1_all(a, g, 4);
  const auto m = assemble_ahom(a, sols);
  save_cell_solutions(dir / "cells", sols, m);
  const auto back = load_cell_solutions(dir / "cells");
  ASSERT_EQ(back.size(), sols.size());
  for (std::size_t k = 0; k < sols.size(); ++k) {
    ASSERT_EQ(back[k].fields.size(), sols[k].fields.size());
    for (std::size_t i = 0; i < sols[k].fields.size(); ++i) EXPECT_EQ(back[k].fields[i], sols[k].fields[i]);
  }
  EXPECT_EQ(assemble_ahom(a, back).value, m.value);
  const auto hm = homogenized_from_json(to_json(m));
  EXPECT_EQ(hm.value, m.value);
  EXPECT_EQ(hm.amplitude, m.amplitude);

  ThetaTableOptions opt;
  opt.nodes = 3;
  opt.keep_fields = true;
  const auto table = build_theta_table(make("separable_sin", {2.0, 1.0, 1.0}, 1), cell_grid(1, 16), opt);
  save_theta_table(dir / "table", table);
  const auto tb = load_theta_table(dir / "table");
  EXPECT_EQ(tb.thetas(), table.thetas());
  for (std::size_t i = 0; i < table.matrices().size(); ++i)
    EXPECT_EQ(tb.matrices()[i].value, table.matrices()[i].value);
  EXPECT_TRUE(tb.has_fields());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace pmhom
