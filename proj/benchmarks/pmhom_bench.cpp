#include <benchmark/benchmark.h>

#include <memory>

#include "pmhom/assembly.hpp"
#include "pmhom/cell_solver.hpp"
#include "pmhom/linear_solvers.hpp"
#include "pmhom/pme.hpp"

namespace {

using namespace pmhom;

const CoefficientField& checkerboard() {
  static const auto a = make_coefficient("checkerboard_smoothed", std::vector<double>{4.0}, 2);
  return a;
}

void BM_AssembleStiffness(benchmark::State& state) {
  const auto g = build_grid(2, static_cast<int>(state.range(0)), BoundaryKind::periodic, 1.0);
  const auto samples = sample_at_quadrature(
      g, [](const QuadraturePoint& qp) { return checkerboard()(qp.x, 0.0); });
  for (auto _ : state) benchmark::DoNotOptimize(assemble_stiffness(g, samples));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(g.cell_count()));
}
BENCHMARK(BM_AssembleStiffness)->Arg(32)->Arg(64)->Arg(128);

void BM_PeriodicCg(benchmark::State& state) {
  const auto g = build_grid(2, static_cast<int>(state.range(0)), BoundaryKind::periodic, 1.0);
  const auto samples = sample_at_quadrature(
      g, [](const QuadraturePoint& qp) { return checkerboard()(qp.x, 0.0); });
  const auto op = assemble_stiffness(g, samples);
  const auto rhs = assemble_flux_load(g, samples, Vec{1.0, 0.0});
  int iterations = 0;
  for (auto _ : state) {
    const auto r = solve_spd(op, rhs, {1e-12, 0});
    iterations = r.iterations;
    benchmark::DoNotOptimize(r.x.data());
  }
  state.counters["cg_iterations"] = iterations;
}
BENCHMARK(BM_PeriodicCg)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_CellProblemSub(benchmark::State& state) {
  const auto g = build_grid(2, static_cast<int>(state.range(0)), BoundaryKind::periodic, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_cp1(checkerboard(), g, 1, 1));
}
BENCHMARK(BM_CellProblemSub)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_CellProblemCritical(benchmark::State& state) {
  const auto a = make_coefficient("separable_sin", std::vector<double>{2.0, 1.0, 1.0}, 2);
  const auto g = build_grid(2, static_cast<int>(state.range(0)), BoundaryKind::periodic, 1.0);
  int periods = 0;
  for (auto _ : state) {
    const auto cell = solve_cp2(a, 1.0, g, 32, 1);
    periods = cell.periods;
    benchmark::DoNotOptimize(cell.fields.data());
  }
  state.counters["periods"] = periods;
}
BENCHMARK(BM_CellProblemCritical)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PmeOscillating(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = build_grid(1, n, BoundaryKind::dirichlet, 1.0);
  InitialProfile init;
  init.level = 0.2;
  PMEProblem p;
  p.m = 2.0;
  p.T = 0.01;
  p.u0 = make_initial(g, init, p.m);
  auto field = std::make_shared<CoefficientField>(
      make_coefficient("layered_sin", std::vector<double>{2.0, 1.0, 1.0}, 1));
  const TimeStepping ts{2.5e-4, 40};
  for (auto _ : state) benchmark::DoNotOptimize(solve_pme(p, OscillatingMode{field, 0.0625}, ts));
  state.SetItemsProcessed(state.iterations() * 40);
}
BENCHMARK(BM_PmeOscillating)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_PmeSquare(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = build_grid(2, n, BoundaryKind::dirichlet, 1.0);
  InitialProfile init;
  init.level = 0.2;
  PMEProblem p;
  p.m = 2.0;
  p.T = 0.005;
  p.u0 = make_initial(g, init, p.m);
  auto field = std::make_shared<CoefficientField>(
      make_coefficient("separable_sin", std::vector<double>{2.0, 1.0, 1.0}, 2));
  const TimeStepping ts{5e-4, 10};
  for (auto _ : state) benchmark::DoNotOptimize(solve_pme(p, OscillatingMode{field, 0.25}, ts));
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_PmeSquare)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
