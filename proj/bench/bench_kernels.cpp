// Parallel kernels against their serial references on one 256x256 instance.

#include "coreg/eval.hpp"
#include "coreg/register.hpp"
#include "coreg/synth.hpp"

#include <benchmark/benchmark.h>

using namespace coreg;

namespace {

const SynthInstance& instance() {
  static const SynthInstance inst = generate_instance(SynthConfig{}, SymmetryGroup::cubic());
  return inst;
}

void BM_dilate(benchmark::State& state) {
  const BinaryMask m = boundary_mask(instance().truth);
  for (auto _ : state) benchmark::DoNotOptimize(dilate(m, 2.5));
}

void BM_dilate_serial(benchmark::State& state) {
  const BinaryMask m = boundary_mask(instance().truth);
  for (auto _ : state) benchmark::DoNotOptimize(dilate_serial(m, 2.5));
}

void BM_split_tests(benchmark::State& state) {
  const auto& inst = instance();
  const auto g = SymmetryGroup::cubic();
  for (auto _ : state)
    benchmark::DoNotOptimize(test_all_regions(inst.corruption.seg, inst.images.quat, g, ModelConfig{}, 1));
}

void BM_split_tests_serial(benchmark::State& state) {
  const auto& inst = instance();
  const auto g = SymmetryGroup::cubic();
  for (auto _ : state)
    benchmark::DoNotOptimize(test_all_regions_serial(inst.corruption.seg, inst.images.quat, g, ModelConfig{}, 1));
}

void BM_energy(benchmark::State& state) {
  const auto& inst = instance();
  for (auto _ : state) {
    IntraModalEnergy e(inst.images.quat, ModelConfig{}, SymmetryGroup::cubic());
    benchmark::DoNotOptimize(e.total(inst.corruption.seg));
  }
}

void BM_energy_serial(benchmark::State& state) {
  const auto& inst = instance();
  for (auto _ : state)
    benchmark::DoNotOptimize(intra_modal_energy(inst.corruption.seg, inst.images.quat, ModelConfig{}, SymmetryGroup::cubic()));
}

}  // namespace

BENCHMARK(BM_dilate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dilate_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_split_tests)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_split_tests_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_energy)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_energy_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
