#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "pmhom/diagnostics.hpp"
#include "pmhom/error.hpp"
#include "pmhom/norms.hpp"

namespace pmhom {
namespace {

struct Fixture {
  std::shared_ptr<const CoefficientField> field;
  std::vector<CellSolution> cells;
  SweepResult sweep;
};

PMEProblem bump(const Grid& g, double m, double T, double level = 0.2) {
  InitialProfile init;
  init.level = level;
  init.amplitude = 1.0;
  init.radius = 0.25;
  PMEProblem p;
  p.m = m;
  p.T = T;
  p.u0 = make_initial(g, init, m);
  return p;
}

Fixture make_fixture(const std::string& family, std::vector<double> params, double m = 2.0,
                     double T = 0.02, double level = 0.2, int n = 512) {
  Fixture f;
  f.field = std::make_shared<CoefficientField>(make_coefficient(family, params, 1));
  const auto cg = build_grid(1, 64, BoundaryKind::periodic, 1.0);
  f.cells.push_back(solve_cp1(*f.field, cg, 8, 1));
  const auto ahom = assemble_ahom(*f.field, f.cells);
  const auto g = build_grid(1, n, BoundaryKind::dirichlet, 1.0);
  const auto p = bump(g, m, T, level);
  f.sweep.m = m;
  f.sweep.r = 1.0;
  f.sweep.eps = {0.25, 0.125, 0.0625};
  const TimeStepping ts{1e-3, 1};
  for (double e : f.sweep.eps) f.sweep.runs.push_back(solve_pme(p, OscillatingMode{f.field, e}, ts));
  f.sweep.homogenized = solve_pme(p, ConstantMatrixMode{ahom}, ts);
  return f;
}

const Fixture& layered() {
  static const Fixture f = make_fixture("layered_sin", {2.0, 1.0, 1.0});
  return f;
}

const Fixture& constant() {
  static const Fixture f = make_fixture("constant", {0.7});
  return f;
}

std::vector<double> trapezoid(const std::vector<double>& t) {
  std::vector<double> w(t.size(), 0.0);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    w[i] += 0.5 * (t[i + 1] - t[i]);
    w[i + 1] += 0.5 * (t[i + 1] - t[i]);
  }
  return w;
}

TEST(CorrectorError, ConstantCoefficientIsDiscretizationMismatchOnly) {
  const auto& f = constant();
  const auto set = CorrectorSet::from_cells(f.cells);
  for (std::size_t i = 0; i < f.sweep.eps.size(); ++i)
    EXPECT_LE(corrector_error(f.sweep, set, i), 1e-10);
}

TEST(CorrectorError, ZeroCorrectorIsPlainGradientMismatch) {
  const auto& f = layered();
  const auto& hom = f.sweep.homogenized;
  const auto w = trapezoid(hom.times);
  std::vector<std::size_t> all(hom.grid.cell_count());
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
  for (std::size_t i = 0; i < f.sweep.eps.size(); ++i) {
    double expected = 0.0;
    for (std::size_t k = 0; k < hom.times.size(); ++k) {
      const auto a = power_field(f.sweep.runs[i].states[k], 2.0);
      const auto b = power_field(hom.states[k], 2.0);
      std::vector<double> d(a.size());
      for (std::size_t j = 0; j < d.size(); ++j) d[j] = a[j] - b[j];
      expected += w[k] * gradient_energy(ScalarField(hom.grid, d), all);
    }
    EXPECT_NEAR(corrector_error(f.sweep, CorrectorSet::zero(1), i), expected, 1e-12 * expected);
  }
}

TEST(CorrectorError, LayeredSeriesDecreases) {
  const auto& f = layered();
  const auto set = CorrectorSet::from_cells(f.cells);
  double prev = INFINITY;
  for (std::size_t i = 0; i < f.sweep.eps.size(); ++i) {
    const double e = corrector_error(f.sweep, set, i);
    EXPECT_LT(e, prev);
    EXPECT_LT(e, corrector_error(f.sweep, CorrectorSet::zero(1), i));
    prev = e;
  }
}

TEST(CorrectorError, MismatchedFinalTimeOrRegime) {
  auto s = layered().sweep;
  const auto g = s.homogenized.grid;
  s.homogenized = solve_pme(bump(g, 2.0, 0.01), ConstantMatrixMode{assemble_ahom(*layered().field, layered().cells)},
                            {1e-3, 1});
  EXPECT_THROW(corrector_error(s, CorrectorSet::zero(1), 0), InvalidArgument);
  auto s2 = layered().sweep;
  s2.r = 3.0;
  EXPECT_THROW(corrector_error(s2, CorrectorSet::from_cells(layered().cells), 0), InvalidArgument);
}

TEST(SolutionError, IdenticalRunsGiveZeros) {
  auto s = constant().sweep;
  for (auto& run : s.runs) run = s.homogenized;
  for (const auto* tag : {"L2_spacetime", "Lrho_Lm1"})
    for (double v : solution_error(s, parse_solution_norm(tag, 2.0))) EXPECT_EQ(v, 0.0);
}

TEST(SolutionError, LayeredSeriesDecreases) {
  for (const auto* tag : {"L2_spacetime", "Lrho_Lm1"}) {
    const auto v = solution_error(layered().sweep, parse_solution_norm(tag, 2.0));
    ASSERT_EQ(v.size(), 3u);
    EXPECT_GT(v[0], v[1]) << tag;
    EXPECT_GT(v[1], v[2]) << tag;
  }
}

TEST(SolutionError, RejectsBadNorms) {
  EXPECT_THROW(parse_solution_norm("Lrho_Lm1", 0.5), InvalidArgument);
  EXPECT_THROW(parse_solution_norm("H1", 2.0), InvalidArgument);
  SolutionNorm bad{SolutionNorm::Kind::lrho_lm1, 0.5};
  EXPECT_THROW(solution_error(layered().sweep, bad), InvalidArgument);
}

PairingTest standard_test(double T) {
  PairingTest t;
  t.phi.support.lo = {0.25, 0.0};
  t.phi.support.hi = {0.75, 0.0};
  t.psi.support.lo = {0.25 * T, 0.0};
  t.psi.support.hi = {0.75 * T, 0.0};
  t.b = CellMode{1.0, {}};
  t.c = CellMode{1.0, {}};
  return t;
}

TEST(Pairing, PlainWeakPairingAgainstIndependentQuadrature) {
  const auto& traj = layered().sweep.runs[1];
  const auto test = standard_test(0.02);
  const auto w = trapezoid(traj.times);
  const int fine = 1 << 14;
  double expected = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double t = traj.times[k];
    const double tc = (t - 0.01) / 0.005;
    if (std::abs(tc) >= 1.0) continue;
    double sum = 0.0;
    for (int i = 0; i < fine; ++i) {
      const double x = (i + 0.5) / fine;
      const double xc = (x - 0.5) / 0.25;
      if (std::abs(xc) >= 1.0) continue;
      sum += traj.states[k].interpolate({x, 0.0}) * std::pow(1.0 - xc * xc, 2);
    }
    expected += w[k] * std::pow(1.0 - tc * tc, 2) * sum / fine;
  }
  EXPECT_NEAR(two_scale_pairing(traj, test, 0.125, 1.0), expected, 1e-6 * std::abs(expected));
}

TEST(Pairing, LinearInCellMode) {
  const auto& traj = layered().sweep.runs[0];
  auto t1 = standard_test(0.02), t2 = t1, t12 = t1;
  t1.b = CellMode{0.0, {{1.0, {1, 0}}}};
  t2.b = CellMode{0.5, {{-0.3, {2, 0}}}};
  t12.b = CellMode{0.5, {{1.0, {1, 0}}, {-0.3, {2, 0}}}};
  const double p1 = two_scale_pairing(traj, t1, 0.25, 1.0);
  const double p2 = two_scale_pairing(traj, t2, 0.25, 1.0);
  const double p12 = two_scale_pairing(traj, t12, 0.25, 1.0);
  EXPECT_NEAR(p12, p1 + p2, 1e-14 * (std::abs(p1) + std::abs(p2)));
}

TEST(Pairing, ZeroMeanModeTendsToZero) {
  const auto& f = layered();
  auto test = standard_test(0.02);
  test.b = CellMode{0.0, {{1.0, {1, 0}}}};
  double prev = INFINITY;
  for (std::size_t i = 0; i < f.sweep.eps.size(); ++i) {
    const double v = std::abs(two_scale_pairing(f.sweep.runs[i], test, f.sweep.eps[i], 1.0));
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Pairing, SupportOutsideDomainIsRejected) {
  auto test = standard_test(0.02);
  test.phi.support.hi = {1.5, 0.0};
  EXPECT_THROW(two_scale_pairing(layered().sweep.runs[0], test, 0.25, 1.0), InvalidArgument);
}

TEST(LocalGradient, BoundedForPositiveBump) {
  LocalGradientOptions opt;
  opt.omega = centered_half_box(layered().sweep.homogenized.grid);
  const auto rep = local_gradient_estimate(layered().sweep, opt);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_EQ(rep.find("grad_u_sq_omega").values.size(), 3u);
}

TEST(LocalGradient, RejectsWholeDomainAndSmallExponent) {
  LocalGradientOptions opt;
  opt.omega = layered().sweep.homogenized.grid.domain();
  EXPECT_THROW(local_gradient_estimate(layered().sweep, opt), InvalidArgument);
  auto s = layered().sweep;
  s.m = 1.5;
  opt.omega = centered_half_box(s.homogenized.grid);
  EXPECT_THROW(local_gradient_estimate(s, opt), InvalidArgument);
}

TEST(LocalGradient, CubicExponentWithVanishingDataWarns) {
  const auto f = make_fixture("layered_sin", {2.0, 1.0, 1.0}, 3.0, 0.01, 0.0);
  LocalGradientOptions opt;
  opt.omega = centered_half_box(f.sweep.homogenized.grid);
  opt.positivity = PositivityClass::general;
  const auto rep = local_gradient_estimate(f.sweep, opt);
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_EQ(rep.find("neg_log_u_omega").values.size(), 3u);
  EXPECT_EQ(rep.find("grad_u_sq_omega").values.size(), 3u);
}

TEST(ConvergenceTable, RatesAndUndefinedEntries) {
  const std::vector<double> eps{0.25, 0.125, 0.0625};
  auto rep = convergence_table({{"halving", eps, {4.0, 2.0, 1.0}, {}}});
  const auto& s = rep.find("halving");
  ASSERT_EQ(s.rates.size(), 2u);
  EXPECT_NEAR(*s.rates[0], 1.0, 1e-15);
  EXPECT_NEAR(*s.rates[1], 1.0, 1e-15);
  EXPECT_TRUE(rep.all_pass());

  auto rep2 = convergence_table({{"zero", {0.25, 0.125}, {1.0, 0.0}, {}}});
  const auto& z = rep2.find("zero");
  ASSERT_EQ(z.rates.size(), 1u);
  EXPECT_FALSE(z.rates[0].has_value());
  EXPECT_FALSE(rep2.warnings.empty());

  auto rep3 = convergence_table({{"thirds", {0.3, 0.1}, {1.0, 0.5}, {}}});
  EXPECT_TRUE(rep3.find("thirds").rates.empty());
  EXPECT_TRUE(rep3.all_pass());
}

TEST(ConvergenceTable, BarenblattRefinementRates) {
  const std::vector<double> h{1.0 / 64, 1.0 / 128, 1.0 / 256};
  const std::vector<std::optional<double>> e{1.7623e-4, 8.13492e-5, 3.96633e-5};
  for (const auto& r : observed_rates(h, e)) {
    ASSERT_TRUE(r.has_value());
    EXPECT_GE(*r, std::log2(1.5));
  }
}

TEST(Report, VerdictsReproduceFromSerializedSeries) {
  const auto& f = layered();
  std::vector<Series> series;
  series.push_back({"l2", f.sweep.eps, {}, {}});
  for (double v : solution_error(f.sweep, parse_solution_norm("L2_spacetime")))
    series.back().values.emplace_back(v);
  auto rep = convergence_table(series);
  rep.add_series({"flat", f.sweep.eps, {1.0, 1.2, 1.1}, {}});
  rep.add_verdict("flat bounded", "flat", VerdictRule::ratio_bound, 1.5);
  rep.add_verdict("flat tight", "flat", VerdictRule::ratio_bound, 1.1);
  const auto back = report_from_json(to_json(rep));
  auto again = back;
  again.reevaluate();
  ASSERT_EQ(again.verdicts.size(), rep.verdicts.size());
  for (std::size_t i = 0; i < rep.verdicts.size(); ++i) {
    EXPECT_EQ(again.verdicts[i].pass, rep.verdicts[i].pass);
    EXPECT_EQ(back.verdicts[i].pass, rep.verdicts[i].pass);
  }
  EXPECT_FALSE(rep.all_pass());
  const auto path = std::filesystem::temp_directory_path() / "pmhom_report.csv";
  write_report_csv(path, rep);
  EXPECT_TRUE(std::filesystem::exists(path));
  std::filesystem::remove(path);
}

TEST(CorrectorAssembly, CriticalRelationHoldsNodewise) {
  const auto field = make_coefficient("separable_sin", std::vector<double>{2.0, 1.0, 1.0}, 1);
  ThetaTableOptions opt;
  opt.theta_max = 10.0;
  opt.nodes = 5;
  opt.keep_fields = true;
  auto table = std::make_shared<const ThetaTable>(
      build_theta_table(field, build_grid(1, 32, BoundaryKind::periodic, 1.0), opt));
  const auto g = build_grid(1, 64, BoundaryKind::dirichlet, 1.0);
  auto p = bump(g, 2.0, 0.01, 0.0);
  const auto hom = solve_pme(p, ThetaDependentMode{table, field.amplitude()}, {2.5e-3, 1});
  const auto set = CorrectorSet::from_table(table, 2.0);
  const double m = 2.0;
  for (std::size_t stamp : {std::size_t{0}, hom.times.size() - 1}) {
    const auto a = assemble_correctors(hom, stamp, set, m, 0.125, 2.0);
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < a.u.size(); ++i) {
      if (a.u[i] > a.floor) {
        EXPECT_EQ(a.z[i], m * std::pow(a.u[i], m - 1.0) * a.w[i]);
      } else {
        EXPECT_EQ(a.z[i], 0.0);
        EXPECT_EQ(a.w[i], 0.0);
        ++zeros;
      }
    }
    EXPECT_GT(zeros, 0u);
  }
}

TEST(CorrectorAssembly, ZeroWhereGradientVanishes) {
  const auto& f = layered();
  const auto set = CorrectorSet::from_cells(f.cells);
  const auto a = assemble_correctors(f.sweep.homogenized, 0, set, 2.0, 0.25, 1.0);
  const auto& g = f.sweep.homogenized.grid;
  for (double x : {0.1, 0.9}) {
    const auto i = static_cast<std::size_t>(std::lround(x / g.spacing())) - 1;
    EXPECT_EQ(a.z[i], 0.0) << "x = " << x;
  }
  double biggest = 0.0;
  for (double z : a.z) biggest = std::max(biggest, std::abs(z));
  EXPECT_GT(biggest, 0.0);
}

}  // namespace
}  // namespace pmhom
