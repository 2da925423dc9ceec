#include <benchmark/benchmark.h>

#include "shiftcam/image_io.hpp"
#include "shiftcam/optics.hpp"
#include "shiftcam/sensing.hpp"
#include "shiftcam/solver.hpp"

namespace {

using namespace shiftcam;

void BM_Forward(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto pattern = generate_pattern(m, m, 7);
  const auto op = make_operator(pattern, nullptr, SensingMode::Bipolar, Architecture::B);
  const auto img = make_phantom(PhantomKind::Disk, m, m);
  std::vector<double> out(op.measurement_count());
  for (auto _ : state) {
    op.apply(img.values(), out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(128)->Arg(256);

void BM_Adjoint(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto pattern = generate_pattern(m, m, 7);
  const auto op = make_operator(pattern, nullptr, SensingMode::Bipolar, Architecture::B);
  std::vector<double> y(op.measurement_count(), 1.0), out(m * m);
  for (auto _ : state) {
    op.apply_adjoint(y, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Adjoint)->Arg(64)->Arg(128)->Arg(256);

void BM_DenseBipolarForward(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const DenseBipolarOperator op(m * m / 4, m, m, 11);
  const auto img = make_phantom(PhantomKind::Disk, m, m);
  std::vector<double> out(op.measurement_count());
  for (auto _ : state) {
    op.apply(img.values(), out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_DenseBipolarForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ComputePsf(benchmark::State& state) {
  OpticsConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(compute_psf(cfg));
}
BENCHMARK(BM_ComputePsf)->Unit(benchmark::kMillisecond);

void BM_ReconstructOuterIteration(benchmark::State& state) {
  const std::size_t m = 128;
  const auto pattern = generate_pattern(m, m, 3);
  const auto op = make_operator(pattern, nullptr, SensingMode::Bipolar, Architecture::B);
  const auto y = op.forward(make_phantom(PhantomKind::Quadrants, m, m).values());
  SolverConfig cfg;
  cfg.max_outer_iters = 1;
  cfg.continuation_steps = 0;
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct(op, y, cfg));
}
BENCHMARK(BM_ReconstructOuterIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
