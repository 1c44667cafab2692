#pragma once

#include <cstdint>
#include <vector>

#include "sqgrasp/cloud.hpp"
#include "sqgrasp/geometry.hpp"
#include "sqgrasp/neighbor_index.hpp"

namespace sqgrasp {

/// Mean over `from` of the squared distance to the nearest point of `to`.
double mean_nearest_sq(const PointCloud& from, const NeighborIndex& to);

/// Symmetric Chamfer distance (squared meters): both directional means of
/// squared nearest-neighbor distances, summed. Throws EmptyCloud.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

/// Greedy farthest point sampling, selection order. The first pick is the
/// point farthest from the centroid; all ties go to the lowest index.
std::vector<std::size_t> fps_indices(const PointCloud& cloud, std::size_t n);

/// Returns the cloud unchanged when n >= |cloud|. `seed` is reserved for
/// stochastic variants and does not affect the result.
PointCloud fps_downsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed = 0);

struct OutlierConfig {
  double plane_tol = 0.003;
  int ransac_iterations = 500;
  double floor_frac = 0.35;
  double radius = 0.008;
  int min_neighbors = 5;
  /// World up direction; a removable floor must face it within floor_max_tilt_deg
  /// and have at most floor_below_frac of all points under it.
  Vec3 up = Vec3::UnitZ();
  double floor_max_tilt_deg = 30.0;
  double floor_below_frac = 0.05;
  std::uint64_t seed = 0x5eed;
};

struct PlaneModel {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;  // n . p = offset
  std::size_t inliers = 0;
};

/// Best floor-plane hypothesis by RANSAC, subject to OutlierConfig's
/// orientation and side rules. inliers == 0 when none qualifies.
PlaneModel ransac_floor_plane(const PointCloud& cloud, const OutlierConfig& cfg);

/// Floor-plane removal followed by a radius filter. Throws DegenerateCloud
/// on fewer than 10 input or surviving points.
PointCloud remove_outliers(const PointCloud& cloud, const OutlierConfig& cfg = {});

struct IcpConfig {
  int max_iter = 60;
  double rel_tol = 1e-8;
};

struct IcpResult {
  RigidTransform transform;
  double fitness = 0.0;  // symmetric Chamfer after alignment
  std::vector<double> mse_history;
  int iterations = 0;
};

/// Point-to-point ICP, returning the transform that maps source onto target.
/// Throws DegenerateGeometry on collinear input or a rank-deficient
/// cross-covariance three iterations in a row.
IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpConfig& cfg = {});

/// Closed-form least-squares rigid transform mapping src[i] onto dst[i].
/// Returns false when the cross-covariance has rank < 2.
bool best_rigid_transform(const std::vector<Vec3>& src, const std::vector<Vec3>& dst, RigidTransform& out);

struct PcaFrame {
  Pose pose;
  Vec3 extents = Vec3::Zero();      // 2 x per-axis standard deviation
  Vec3 eigenvalues = Vec3::Zero();  // descending
};

/// Centroid plus covariance eigenvectors (descending). Columns 0 and 1 are
/// sign-fixed toward +z, then +x; column 2 completes a right-handed frame.
/// Throws DegenerateGeometry on coplanar input or fewer than 4 points.
PcaFrame pca_frame(const PointCloud& cloud);

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t);

}  // namespace sqgrasp
