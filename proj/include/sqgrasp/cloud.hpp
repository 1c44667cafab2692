#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace sqgrasp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered 3D points in meters with optional per-point instance labels.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> labels;  // empty, or one entry per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return !labels.empty(); }

  void push_back(const Vec3& p) { points.push_back(p); }
  void push_back(const Vec3& p, int label) {
    points.push_back(p);
    labels.push_back(label);
  }

  /// Cloud made of the given indices, labels carried along.
  PointCloud select(const std::vector<std::size_t>& indices) const;

  Vec3 centroid() const;

  /// Throws DegenerateCloud if labels are present with the wrong length or a
  /// coordinate is not finite.
  void validate() const;
};

}  // namespace sqgrasp
