#include "sqgrasp/cloud_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/rng.hpp"

namespace sqgrasp {

PointCloud PointCloud::select(const std::vector<std::size_t>& indices) const {
  PointCloud out;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) out.points.push_back(points[i]);
  if (has_labels()) {
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) out.labels.push_back(labels[i]);
  }
  return out;
}

Vec3 PointCloud::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : points) sum += p;
  return points.empty() ? sum : Vec3(sum / static_cast<double>(points.size()));
}

void PointCloud::validate() const {
  if (has_labels() && labels.size() != points.size()) {
    throw Error(ErrorCode::DegenerateCloud, "label count does not match point count");
  }
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw Error(ErrorCode::DegenerateCloud, "non-finite coordinate");
  }
}

double mean_nearest_sq(const PointCloud& from, const NeighborIndex& to) {
  const auto hits = to.nearest_all(from.points);
  double sum = 0.0;
  for (const auto& h : hits) sum += h.sq_dist;
  return sum / static_cast<double>(from.size());
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCloud, "chamfer_distance on empty cloud");
  const NeighborIndex ia(a);
  const NeighborIndex ib(b);
  return mean_nearest_sq(a, ib) + mean_nearest_sq(b, ia);
}

std::vector<std::size_t> fps_indices(const PointCloud& cloud, std::size_t n) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "fps on empty cloud");
  if (n == 0) throw Error(ErrorCode::Usage, "fps needs n >= 1");
  const std::size_t m = cloud.size();
  n = std::min(n, m);
  const auto sm = static_cast<std::ptrdiff_t>(m);
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
  picked.reserve(n);
  std::vector<double> dist(m, std::numeric_limits<double>::infinity());
  while (picked.size() < n) {
    const Vec3 last = cloud.points[picked.back()];
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < sm; ++i) {
      dist[i] = std::min(dist[i], squared_distance(cloud.points[i], last));
    }
    // The argmax walks in index order, so ties resolve to the lowest index.
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    picked.push_back(best);
  }
  return picked;
}

PointCloud fps_downsample(const PointCloud& cloud, std::size_t n, std::uint64_t /*seed*/) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "fps on empty cloud");
  if (n >= cloud.size()) return cloud;
  return cloud.select(fps_indices(cloud, n));
}

PlaneModel ransac_floor_plane(const PointCloud& cloud, const OutlierConfig& cfg) {
  PlaneModel best;
  best.inliers = 0;
  const std::size_t m = cloud.size();
  if (m < 3) return best;
  const Vec3 up = cfg.up.normalized();
  const double min_cos = std::cos(cfg.floor_max_tilt_deg * std::numbers::pi / 180.0);
  Rng rng(cfg.seed);
  const auto sm = static_cast<std::ptrdiff_t>(m);

  for (int it = 0; it < cfg.ransac_iterations; ++it) {
    const std::size_t i0 = rng.below(m);
    std::size_t i1 = rng.below(m);
    std::size_t i2 = rng.below(m);
    if (i0 == i1 || i1 == i2 || i0 == i2) continue;
    const Vec3& p0 = cloud.points[i0];
    Vec3 n = (cloud.points[i1] - p0).cross(cloud.points[i2] - p0);
    const double len = n.norm();
    if (len < 1e-12) continue;
    n /= len;
    if (n.dot(up) < 0) n = -n;
    if (n.dot(up) < min_cos) continue;
    const double offset = n.dot(p0);

    std::size_t inliers = 0;
    std::ptrdiff_t above = 0;
    std::ptrdiff_t below = 0;
#pragma omp parallel for reduction(+ : inliers, above, below) schedule(static)
    for (std::ptrdiff_t i = 0; i < sm; ++i) {
      const double d = n.dot(cloud.points[i]) - offset;
      if (std::abs(d) <= cfg.plane_tol) ++inliers;
      else if (d > 0) ++above;
      else ++below;
    }
    // A floor supports the scene; an object's own flat top has its sides
    // underneath.
    if (above < below || static_cast<double>(below) > cfg.floor_below_frac * static_cast<double>(m)) continue;
    if (inliers > best.inliers) best = {n, offset, inliers};
  }
  return best;
}

PointCloud remove_outliers(const PointCloud& cloud, const OutlierConfig& cfg) {
  if (cloud.size() < 10) throw Error(ErrorCode::DegenerateCloud, "remove_outliers needs at least 10 points");
  const std::size_t m = cloud.size();

  std::vector<std::size_t> keep;
  keep.reserve(m);
  const PlaneModel floor = ransac_floor_plane(cloud, cfg);
  const bool drop_floor =
      floor.inliers > 0 && static_cast<double>(floor.inliers) > cfg.floor_frac * static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (drop_floor && std::abs(floor.normal.dot(cloud.points[i]) - floor.offset) <= cfg.plane_tol) continue;
    keep.push_back(i);
  }
  PointCloud stage1 = cloud.select(keep);

  const NeighborIndex index(stage1);
  const auto n1 = static_cast<std::ptrdiff_t>(stage1.size());
  std::vector<char> dense(stage1.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n1; ++i) {
    // count_within includes the query point itself.
    const std::size_t neighbors = index.count_within(stage1.points[i], cfg.radius) - 1;
    dense[i] = neighbors >= static_cast<std::size_t>(cfg.min_neighbors) ? 1 : 0;
  }
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < stage1.size(); ++i) {
    if (dense[i]) survivors.push_back(i);
  }
  if (survivors.size() < 10) {
    throw Error(ErrorCode::DegenerateCloud,
                "only " + std::to_string(survivors.size()) + " points survive outlier removal");
  }
  return stage1.select(survivors);
}

bool best_rigid_transform(const std::vector<Vec3>& src, const std::vector<Vec3>& dst, RigidTransform& out) {
  const std::size_t n = src.size();
  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(n);
  cd /= static_cast<double>(n);
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s[1] > 1e-12 * std::max(s[0], 1e-300))) return false;
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  out.rotation = v * d * u.transpose();
  out.translation = cd - out.rotation * cs;
  return true;
}

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out = cloud;
  for (Vec3& p : out.points) p = t.apply(p);
  return out;
}

namespace {

bool is_collinear(const PointCloud& cloud) {
  if (cloud.size() < 3) return true;
  const Vec3 c = cloud.centroid();
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : cloud.points) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();  // ascending
  return !(ev[1] > 1e-12 * std::max(ev[2], 1e-300));
}

}  // namespace

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpConfig& cfg) {
  if (is_collinear(source) || is_collinear(target)) {
    throw Error(ErrorCode::DegenerateGeometry, "icp needs at least 3 non-collinear points per cloud");
  }
  const NeighborIndex index(target);
  IcpResult result;
  RigidTransform current;
  RigidTransform previous;
  int degenerate_streak = 0;
  std::vector<Vec3> moved(source.size());
  std::vector<Vec3> matched(source.size());
  const auto n = static_cast<std::ptrdiff_t>(source.size());

  for (int it = 0; it < cfg.max_iter; ++it) {
    for (std::ptrdiff_t i = 0; i < n; ++i) moved[i] = current.apply(source.points[i]);
    const auto hits = index.nearest_all(moved);
    double mse = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      mse += hits[i].sq_dist;
      matched[i] = target.points[hits[i].index];
    }
    mse /= static_cast<double>(n);
    result.iterations = it + 1;
    if (!result.mse_history.empty()) {
      const double prev = result.mse_history.back();
      if (mse > prev) {
        // A step that did not help is not kept.
        current = previous;
        break;
      }
      result.mse_history.push_back(mse);
      if (prev - mse <= cfg.rel_tol * prev) break;
    } else {
      result.mse_history.push_back(mse);
    }
    if (mse == 0.0) break;

    RigidTransform next;
    if (!best_rigid_transform(source.points, matched, next)) {
      if (++degenerate_streak >= 3) {
        throw Error(ErrorCode::DegenerateGeometry, "rank-deficient cross-covariance in icp");
      }
      continue;
    }
    degenerate_streak = 0;
    previous = current;
    current = next;
  }
  result.transform = current;
  result.fitness = chamfer_distance(transform_cloud(source, current), target);
  return result;
}

PcaFrame pca_frame(const PointCloud& cloud) {
  if (cloud.size() < 4) throw Error(ErrorCode::DegenerateGeometry, "pca_frame needs at least 4 points");
  const Vec3 c = cloud.centroid();
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : cloud.points) cov += (p - c) * (p - c).transpose();
  cov /= static_cast<double>(cloud.size());
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();  // ascending
  if (!(ev[0] > 1e-10 * std::max(ev[2], 1e-300))) {
    throw Error(ErrorCode::DegenerateGeometry, "coplanar cloud has no 3D principal frame");
  }
  Mat3 axes;
  for (int k = 0; k < 2; ++k) {
    Vec3 col = es.eigenvectors().col(2 - k);
    if (std::abs(col.z()) > 1e-9) {
      if (col.z() < 0) col = -col;
    } else if (std::abs(col.x()) > 1e-9) {
      if (col.x() < 0) col = -col;
    } else if (col.y() < 0) {
      col = -col;
    }
    axes.col(k) = col;
  }
  axes.col(2) = axes.col(0).cross(axes.col(1)).normalized();

  PcaFrame frame;
  frame.pose.rotation = axes;
  frame.pose.translation = c;
  frame.eigenvalues = Vec3(ev[2], ev[1], ev[0]);
  frame.extents = 2.0 * frame.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return frame;
}

}  // namespace sqgrasp
