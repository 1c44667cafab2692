#include <cmath>
#include <limits>
#include <numbers>

#include "sqgrasp/cloud_ops.hpp"
#include "sqgrasp/fitting.hpp"

namespace sqgrasp {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Rotation about `axis` that brings m closest to identity.
Mat3 best_twist(const Mat3& m, const Vec3& axis) {
  Mat3 k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  const double c = m.trace() - axis.dot(m * axis);
  const double s = (m * k).trace();
  return axis_angle(axis, std::atan2(s, c));
}

// Angle between rotation r (pred frame composed with a symmetry) and gt,
// with continuous symmetry axes of gt projected out.
double projected_angle(const Mat3& r, const Mat3& gt, const SymmetryGroup& group) {
  if (group.all_continuous()) return 0.0;
  Mat3 m = gt.transpose() * r;
  for (int axis = 0; axis < 3; ++axis) {
    if (group.continuous[axis]) m = m * best_twist(m, Vec3::Unit(axis));
  }
  return rotation_angle(Mat3::Identity(), m);
}

const Mat3* flips() {
  static const Mat3 f[4] = {Vec3(1, 1, 1).asDiagonal(), Vec3(1, -1, -1).asDiagonal(),
                            Vec3(-1, 1, -1).asDiagonal(), Vec3(-1, -1, 1).asDiagonal()};
  return f;
}

}  // namespace

Superquadric align_to(const Superquadric& pred, const Superquadric& gt) {
  Superquadric best = pred;
  double best_angle = std::numeric_limits<double>::infinity();
  for (const Superquadric& form : equivalent_forms(pred)) {
    for (int f = 0; f < 4; ++f) {
      const Mat3 r = form.pose.rotation * flips()[f];
      const double angle = rotation_angle(r, gt.pose.rotation);
      if (angle < best_angle) {
        best_angle = angle;
        best = form;
        best.pose.rotation = r;
      }
    }
  }
  return best;
}

Metrics eval_metrics(const Superquadric& pred, const Superquadric& gt, std::uint64_t seed) {
  Metrics m;
  m.mte_mm = (pred.pose.translation - gt.pose.translation).norm() * 1e3;

  const SymmetryGroup group = symmetry_rotations(gt);
  double best = std::numeric_limits<double>::infinity();
  for (const Superquadric& form : equivalent_forms(pred)) {
    for (const Mat3& s : group.rotations) {
      best = std::min(best, projected_angle(form.pose.rotation * s, gt.pose.rotation, group));
    }
  }
  m.mre_deg = best * kRadToDeg;

  // Exact reparametrization of pred that lines up with gt, so equal-seed
  // draws of matching surfaces correspond point by point.
  const Superquadric aligned = align_to(pred, gt);
  m.mcd_mm2 = chamfer_distance(sample_surface(aligned, 2000, seed), sample_surface(gt, 2000, seed)) * 1e6;
  return m;
}

}  // namespace sqgrasp
