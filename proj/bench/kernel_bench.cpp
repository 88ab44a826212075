// Parallel kernels against their serial references.
//   ./build/bench/kernel_bench --benchmark_min_time=0.2

#include <filesystem>

#include <benchmark/benchmark.h>

#include "cbench/contour.hpp"
#include "cbench/stimulus.hpp"
#include "cbench/synthetic.hpp"

namespace {

using namespace cbench;

GrayImage test_object(int canvas) {
  stimulus::DatasetConfig config;
  config.pixels_per_degree = canvas / config.field_degrees;
  auto source = synthetic::make_source("truck", 0, 320, 11);
  return stimulus::object_luminance(stimulus::place_object(source, config));
}

void BM_ContourFFTParallel(benchmark::State& state) {
  auto image = test_object(static_cast<int>(state.range(0)));
  stimulus::DatasetConfig config;
  auto params = config.gabor();
  contour::OrientationBank bank(8);
  for (auto _ : state) benchmark::DoNotOptimize(contour::contour_energy(image, params, bank));
}

void BM_ContourDirectSerial(benchmark::State& state) {
  auto image = test_object(static_cast<int>(state.range(0)));
  stimulus::DatasetConfig config;
  auto params = config.gabor();
  contour::OrientationBank bank(8);
  for (auto _ : state) benchmark::DoNotOptimize(reference::contour_energy_direct(image, params, bank));
}

// Full 12-source build (one object per category) at jobs = range(0); 0 means OpenMP default.
void BM_BuildDataset(benchmark::State& state) {
  auto sources = synthetic::make_library(1, 320, 5);
  stimulus::DatasetConfig config;
  config.jobs = static_cast<int>(state.range(0));
  config.write_sidecars = false;
  auto out = std::filesystem::temp_directory_path() / "cbench_kernel_bench";
  for (auto _ : state) {
    std::filesystem::remove_all(out);
    benchmark::DoNotOptimize(stimulus::build_dataset(sources, config, out));
  }
  std::filesystem::remove_all(out);
}

}  // namespace

BENCHMARK(BM_ContourFFTParallel)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ContourDirectSerial)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildDataset)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
