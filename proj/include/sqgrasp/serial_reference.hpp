#pragma once

#include <cstddef>
#include <vector>

#include "sqgrasp/cloud.hpp"
#include "sqgrasp/neighbor_index.hpp"

// Single-threaded brute-force kernels. They define the expected results for
// the accelerated OpenMP paths and are what the benchmarks compare against.
namespace sqgrasp::serial {

NeighborIndex::Hit nearest(const std::vector<Vec3>& points, const Vec3& query);

/// O(n m) double loop.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

std::vector<std::size_t> fps_indices(const PointCloud& cloud, std::size_t n);

}  // namespace sqgrasp::serial
