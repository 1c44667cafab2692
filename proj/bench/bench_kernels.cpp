// Serial brute-force kernels against the kd-tree / OpenMP paths.
#include <benchmark/benchmark.h>

#include "sqgrasp/cloud_ops.hpp"
#include "sqgrasp/geometry.hpp"
#include "sqgrasp/serial_reference.hpp"

namespace {

using namespace sqgrasp;

Superquadric shape() {
  Superquadric sq;
  sq.shape = {0.6, 1.3};
  sq.scale = {0.05, 0.03, 0.04};
  sq.pose.rotation = axis_angle(Vec3(1, 2, 3), 0.7);
  return sq;
}

PointCloud cloud(std::size_t n, std::uint64_t seed) { return sample_surface(shape(), n, seed); }

void BM_ChamferSerial(benchmark::State& st) {
  const auto a = cloud(st.range(0), 1);
  const auto b = cloud(st.range(0), 2);
  for (auto _ : st) benchmark::DoNotOptimize(serial::chamfer_distance(a, b));
  st.SetComplexityN(st.range(0));
}

void BM_ChamferParallel(benchmark::State& st) {
  const auto a = cloud(st.range(0), 1);
  const auto b = cloud(st.range(0), 2);
  for (auto _ : st) benchmark::DoNotOptimize(chamfer_distance(a, b));
  st.SetComplexityN(st.range(0));
}

void BM_FpsSerial(benchmark::State& st) {
  const auto a = cloud(st.range(0), 3);
  for (auto _ : st) benchmark::DoNotOptimize(serial::fps_indices(a, 500));
}

void BM_FpsParallel(benchmark::State& st) {
  const auto a = cloud(st.range(0), 3);
  for (auto _ : st) benchmark::DoNotOptimize(fps_indices(a, 500));
}

void BM_NearestSerial(benchmark::State& st) {
  const auto a = cloud(st.range(0), 4);
  const auto q = cloud(1000, 5);
  for (auto _ : st)
    for (const auto& p : q.points) benchmark::DoNotOptimize(serial::nearest(a.points, p));
}

void BM_NearestTree(benchmark::State& st) {
  const auto a = cloud(st.range(0), 4);
  const auto q = cloud(1000, 5);
  const NeighborIndex index(a);
  for (auto _ : st)
    for (const auto& p : q.points) benchmark::DoNotOptimize(index.nearest(p));
}

}  // namespace

BENCHMARK(BM_ChamferSerial)->RangeMultiplier(4)->Range(256, 4096)->Complexity();
BENCHMARK(BM_ChamferParallel)->RangeMultiplier(4)->Range(256, 4096)->Complexity();
BENCHMARK(BM_FpsSerial)->Arg(5000)->Arg(20000);
BENCHMARK(BM_FpsParallel)->Arg(5000)->Arg(20000);
BENCHMARK(BM_NearestSerial)->Arg(2000)->Arg(20000);
BENCHMARK(BM_NearestTree)->Arg(2000)->Arg(20000);

BENCHMARK_MAIN();
