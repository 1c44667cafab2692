#include "sqgrasp/serial_reference.hpp"

#include <limits>

#include "sqgrasp/errors.hpp"

namespace sqgrasp::serial {

NeighborIndex::Hit nearest(const std::vector<Vec3>& points, const Vec3& query) {
  NeighborIndex::Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = squared_distance(query, points[i]);
    if (d < best.sq_dist) best = {i, d};
  }
  return best;
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCloud, "chamfer_distance on empty cloud");
  auto directional = [](const PointCloud& from, const PointCloud& to) {
    double sum = 0.0;
    for (const Vec3& p : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to.points) best = std::min(best, squared_distance(p, q));
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return directional(a, b) + directional(b, a);
}

std::vector<std::size_t> fps_indices(const PointCloud& cloud, std::size_t n) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "fps on empty cloud");
  const std::size_t m = cloud.size();
  n = std::min(n, m);
  const Vec3 c = cloud.centroid();
  std::size_t start = 0;
  double far = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = squared_distance(cloud.points[i], c);
    if (d > far) {
      far = d;
      start = i;
    }
  }
  std::vector<std::size_t> picked{start};
  std::vector<double> dist(m, std::numeric_limits<double>::infinity());
  while (picked.size() < n) {
    const Vec3& last = cloud.points[picked.back()];
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      dist[i] = std::min(dist[i], squared_distance(cloud.points[i], last));
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    picked.push_back(best);
  }
  return picked;
}

}  // namespace sqgrasp::serial
