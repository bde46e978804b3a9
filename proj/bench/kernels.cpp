// Serial reference kernels against their OpenMP versions.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cutfem/analytic.hpp"
#include "cutfem/assembly.hpp"
#include "cutfem/electrodes.hpp"
#include "cutfem/metrics.hpp"
#include "cutfem/partition.hpp"
#include "cutfem/trial_space.hpp"

namespace {

using namespace cutfem;

CompartmentModel head() {
  const Vec3 c(127, 127, 127);
  return CompartmentModel({{"brain", LevelSetField::sphere(Vec3(129, 127, 127), 78), isotropic(0.33)},
                           {"csf", LevelSetField::sphere(c, 80), isotropic(0.33)},
                           {"skull", LevelSetField::sphere(c, 86), isotropic(0.01)},
                           {"scalp", LevelSetField::sphere(c, 92), isotropic(0.43)}});
}

struct Fixture {
  CompartmentModel model = head();
  BackgroundMesh mesh = BackgroundMesh::covering(model.bounding_box(), 8.0);
  CutCellPartition partition = build_partition(mesh, model);
  TrialSpace space = build_trial_space(mesh, build_submeshes(partition));
  SparseSystem system = assemble_system(space, partition, model);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::kSerial : Execution::kParallel;
}

void BM_Partition(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(build_partition(f.mesh, f.model, {}, mode(state)));
}

void BM_Assembly(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(assemble_system(f.space, f.partition, f.model, {}, mode(state)));
}

void BM_SpMV(benchmark::State& state) {
  const auto& k = fixture().system.stiffness;
  std::vector<double> x(static_cast<std::size_t>(k.cols()), 1.0);
  std::vector<double> y(static_cast<std::size_t>(k.rows()));
  for (auto _ : state) {
    k.multiply(x, y, mode(state));
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k.values().size()));
}

void BM_SpMVBlock(benchmark::State& state) {
  const auto& k = fixture().system.stiffness;
  const int nrhs = 8;
  std::vector<double> x(static_cast<std::size_t>(k.cols()) * nrhs, 1.0);
  std::vector<double> y(static_cast<std::size_t>(k.rows()) * nrhs);
  for (auto _ : state) {
    k.multiply_block(x, y, nrhs, mode(state));
    benchmark::ClobberMemory();
  }
}

void BM_DipoleScan(benchmark::State& state) {
  const SphereModel m{{92.0, 86.0, 80.0}, {0.43, 0.01, 0.33}, Vec3::Zero(), 200};
  const auto el = fibonacci_sphere(128, m.center, 92.0);
  std::vector<Vec3> grid;
  for (int i = -9; i <= 9; ++i)
    for (int j = -9; j <= 9; ++j)
      for (int k = -9; k <= 9; ++k)
        if (Vec3(i, j, k).norm() * 8.0 < 72.0) grid.push_back(8.0 * Vec3(i, j, k));
  LeadField lf(static_cast<int>(el.size()), static_cast<int>(grid.size()));
  lf.positions = grid;
  for (int s = 0; s < lf.sources; ++s)
    for (int d = 0; d < 3; ++d) lf.set_column(3 * s + d, sphere_forward(m, {grid[s], Vec3::Unit(d)}, el));
  const auto data = sphere_forward(m, {Vec3(10, -20, 30), Vec3(1, 0.5, -0.2)}, el);
  for (auto _ : state) benchmark::DoNotOptimize(dipole_scan(lf, data, mode(state)));
}

}  // namespace

BENCHMARK(BM_Partition)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Assembly)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SpMV)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SpMVBlock)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DipoleScan)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
