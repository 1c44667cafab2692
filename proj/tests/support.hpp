#pragma once

#include <cmath>

#include "sqgrasp/geometry.hpp"
#include "sqgrasp/rng.hpp"

namespace testing {

using namespace sqgrasp;

inline Mat3 random_rotation(Rng& rng) {
  // Normalized Gaussian quaternion is uniform on SO(3).
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline Superquadric random_sq(Rng& rng, double eps_lo = 0.2, double eps_hi = 1.8, double a_lo = 0.02,
                              double a_hi = 0.1) {
  Superquadric sq;
  sq.shape.eps1 = rng.uniform(eps_lo, eps_hi);
  sq.shape.eps2 = rng.uniform(eps_lo, eps_hi);
  sq.scale.ax = rng.uniform(a_lo, a_hi);
  sq.scale.ay = rng.uniform(a_lo, a_hi);
  sq.scale.az = rng.uniform(a_lo, a_hi);
  sq.pose.rotation = random_rotation(rng);
  sq.pose.translation = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
  return sq;
}

// Brute-force nearest squared distance.
inline double nearest_sq(const std::vector<Vec3>& pts, const Vec3& q) {
  double best = INFINITY;
  for (const auto& p : pts) best = std::min(best, (p - q).squaredNorm());
  return best;
}

}  // namespace testing
