#include <array>

#include <benchmark/benchmark.h>

#include "gravtrack/basins.hpp"
#include "gravtrack/gravity.hpp"
#include "gravtrack/preprocess.hpp"
#include "gravtrack/reference.hpp"
#include "gravtrack/synth.hpp"

using namespace gravtrack;

namespace {

Image2D frame(int size) {
  SynthSpec spec;
  spec.width = spec.height = size;
  spec.frames = 1;
  spec.blob_count = size / 32;
  return synthesize(spec).frames.front();
}

void BM_CorrelateSerial(benchmark::State& state) {
  const Image2D img = frame(static_cast<int>(state.range(0)));
  const GravityKernelSet k = build_kernels(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::correlate_reflect(img, k.kx));
}

void BM_CorrelateParallel(benchmark::State& state) {
  const Image2D img = frame(static_cast<int>(state.range(0)));
  const GravityKernelSet k = build_kernels(static_cast<int>(state.range(1)));
  const std::array<const Image2D*, 1> kernels{&k.kx};
  for (auto _ : state) benchmark::DoNotOptimize(correlate_reflect(img, kernels));
}

void BM_KuwaharaSerial(benchmark::State& state) {
  const Image2D img = frame(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::kuwahara_anisotropic(img, {}));
}

void BM_KuwaharaParallel(benchmark::State& state) {
  const Image2D img = frame(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kuwahara_anisotropic(img, {}));
}

void BM_OracleSerial(benchmark::State& state) {
  const ForceField2D f = force_field(frame(static_cast<int>(state.range(0))), build_kernels(20));
  for (auto _ : state) benchmark::DoNotOptimize(reference::drop_of_water_oracle(f));
}

void BM_OracleParallel(benchmark::State& state) {
  const ForceField2D f = force_field(frame(static_cast<int>(state.range(0))), build_kernels(20));
  for (auto _ : state) benchmark::DoNotOptimize(drop_of_water_oracle(f));
}

}  // namespace

BENCHMARK(BM_CorrelateSerial)->Args({256, 10})->Args({256, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CorrelateParallel)->Args({256, 10})->Args({256, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KuwaharaSerial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KuwaharaParallel)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleSerial)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleParallel)->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
