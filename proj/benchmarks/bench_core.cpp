#include <benchmark/benchmark.h>

#include <random>

#include "mpmorph/loss.hpp"
#include "mpmorph/parallel.hpp"
#include "mpmorph/stress.hpp"
#include "mpmorph/tape.hpp"
#include "mpmorph/transfer.hpp"

namespace {

using namespace mpmorph;

ParticleSet<3> cloud(std::size_t n, const SimParams<3>& params, double speed = 0.5) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.25, 0.75);
  VecField<3> x(n);
  for (auto& p : x) p = Vec<3>(u(rng), u(rng), u(rng)) * params.domain_length();
  const double V0 = params.dx * params.dx * params.dx / 8.0;
  ParticleSet<3> s = ParticleSet<3>::at_rest(std::move(x), params.rho * V0, V0);
  for (std::size_t p = 0; p < n; ++p) {
    s.v[p] = speed * (2.0 * Vec<3>(u(rng), u(rng), u(rng)) - Vec<3>::Ones());
    s.F[p] += 0.01 * Mat<3>::Identity();
  }
  return s;
}

void BM_Stress(benchmark::State& state) {
  SimParams<3> params;
  Mat<3> F;
  F << 1.05, 0.02, 0.0, -0.01, 0.97, 0.03, 0.0, 0.01, 1.01;
  for (auto _ : state) benchmark::DoNotOptimize(pk1_stress<3>(F, params));
}
BENCHMARK(BM_Stress);

void BM_StressDifferential(benchmark::State& state) {
  SimParams<3> params;
  Mat<3> F, dF;
  F << 1.05, 0.02, 0.0, -0.01, 0.97, 0.03, 0.0, 0.01, 1.01;
  dF.setConstant(0.1);
  for (auto _ : state) benchmark::DoNotOptimize(pk1_stress_differential<3>(F, dF, params));
}
BENCHMARK(BM_StressDifferential);

void BM_P2G(benchmark::State& state) {
  SimParams<3> params;
  params.deterministic = state.range(1) != 0;
  const auto s = cloud(static_cast<std::size_t>(state.range(0)), params);
  StepWorkspace<3> ws;
  ws.prepare(params);
  for (auto _ : state) {
    p2g<3>(s, params, ws);
    benchmark::DoNotOptimize(ws.grid.mass.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_P2G)->Args({2000, 1})->Args({20000, 1})->Args({20000, 0});

void BM_Step(benchmark::State& state) {
  SimParams<3> params;
  // At rest apart from the stretch, so the cloud stays put over many iterations.
  auto s = cloud(static_cast<std::size_t>(state.range(0)), params, 0.0);
  StepWorkspace<3> ws;
  for (auto _ : state) step_in_place<3>(s, params, ws);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Step)->Arg(2000)->Arg(20000);

void BM_RecordAndBackprop(benchmark::State& state) {
  SimParams<3> params;
  params.grid_res = 16;
  params.dx = 1.0 / 16;
  const auto s = cloud(2000, params);
  const VecField<3> seed(s.size(), Vec<3>::Constant(1e-3));
  for (auto _ : state) {
    const Tape<3> tape = record_segment<3>(s, {}, 10, params);
    benchmark::DoNotOptimize(backprop<3>(tape, seed, 1));
  }
}
BENCHMARK(BM_RecordAndBackprop)->Unit(benchmark::kMillisecond);

void BM_LogMassGradient(benchmark::State& state) {
  SimParams<3> params;
  params.grid_res = 16;
  params.dx = 1.0 / 16;
  const auto s = cloud(2000, params);
  auto target = s;
  for (auto& x : target.x) x *= 0.98;
  const auto obj = Objective<3>::make(LossKind::kLogMass, target.x, target.m, params, 1000.0);
  VecField<3> g;
  for (auto _ : state) benchmark::DoNotOptimize(obj.gradient(s, params, g));
}
BENCHMARK(BM_LogMassGradient);

}  // namespace

BENCHMARK_MAIN();
