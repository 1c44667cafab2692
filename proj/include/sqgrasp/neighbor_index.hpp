#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sqgrasp/cloud.hpp"

namespace sqgrasp {

/// Axis-aligned splitting tree over a fixed point set. Nearest-neighbor
/// answers match a linear scan exactly, ties going to the lowest index.
/// Immutable after construction; concurrent queries are safe.
class NeighborIndex {
 public:
  static constexpr std::size_t kLeafSize = 16;

  struct Hit {
    std::size_t index = 0;
    double sq_dist = 0.0;
  };

  explicit NeighborIndex(std::span<const Vec3> points);
  explicit NeighborIndex(const PointCloud& cloud) : NeighborIndex(std::span<const Vec3>(cloud.points)) {}

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  Hit nearest(const Vec3& query) const;
  /// Number of indexed points with squared distance <= radius^2.
  std::size_t count_within(const Vec3& query, double radius) const;

  /// Batched nearest queries, parallel over queries.
  std::vector<Hit> nearest_all(std::span<const Vec3> queries) const;

 private:
  struct Node {
    Vec3 lo;
    Vec3 hi;
    std::size_t begin = 0;
    std::size_t end = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Squared Euclidean distance, evaluated in fixed x, y, z order so every
/// code path produces bit-identical values.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace sqgrasp
