// Serial reference against the OpenMP kernels. Arg 0: serial, arg 1: parallel.
#include <benchmark/benchmark.h>

#include "levytrace/heatkernel.hpp"
#include "levytrace/renewal.hpp"
#include "levytrace/sampler.hpp"
#include "levytrace/trace.hpp"

using namespace levytrace;

namespace {

ExecutionPolicy policy_for(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecutionPolicy::serial() : ExecutionPolicy{};
}

const SpectralModel& cauchy() {
  static const auto m = SpectralModel::stable(1.0, 2);
  return m;
}

void BM_RenewalTable(benchmark::State& state) {
  const auto policy = policy_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(build_renewal_table(SpectralModel::relativistic(1.0, 2), 1e-4, 1e4, 321, policy));
}

void BM_KernelGrid(benchmark::State& state) {
  const auto policy = policy_for(state);
  const auto table = build_renewal_table(cauchy(), 1e-6, 1e4, 401);
  KernelGridOptions opt;
  opt.t_min = 1e-2;
  opt.t_max = 1.0;
  opt.rows_per_decade = 8;
  for (auto _ : state) benchmark::DoNotOptimize(build_kernel_grid(cauchy(), table, opt, policy));
}

void BM_SampleExits(benchmark::State& state) {
  const auto policy = policy_for(state);
  const auto disk = SmoothDomain::ball({0, 0}, 1.0);
  SamplerConfig cfg;
  cfg.h = 1e-3;
  cfg.t_max = 50.0;
  cfg.paths = 20000;
  cfg.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sample_exits(cauchy(), disk, Point{0.0, 0.0}, cfg, policy));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(cfg.paths));
}

void BM_RemainderProfile(benchmark::State& state) {
  static const TraceContext ctx(cauchy(), 0.1, 0.1, 32);
  const auto policy = policy_for(state);
  const auto disk = SmoothDomain::ball({0, 0}, 1.0);
  std::vector<Point> xs;
  for (double s = 0.0; s < 0.995; s += 0.02) xs.push_back(Point{s, 0.0});
  for (auto _ : state) benchmark::DoNotOptimize(estimate_remainders(ctx, disk, 0.1, xs, {}, {20000, 1, 0}, policy));
  state.SetItemsProcessed(state.iterations() * 20000);
}

}  // namespace

BENCHMARK(BM_RenewalTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_KernelGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SampleExits)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RemainderProfile)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
