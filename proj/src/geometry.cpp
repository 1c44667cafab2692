#include "sqgrasp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/rng.hpp"

namespace sqgrasp {

namespace {

constexpr double kPi = std::numbers::pi;

bool nearly_equal_scale(double a, double b) { return std::abs(a - b) <= 0.01 * std::max(a, b); }

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::PoleSingularity: return "PoleSingularity";
    case ErrorCode::NoFeasibleGrasp: return "NoFeasibleGrasp";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

double ScaleParams::min() const { return std::min({ax, ay, az}); }

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::compose(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

bool Superquadric::is_valid() const {
  return shape.eps1 > 0 && shape.eps2 > 0 && scale.ax > 0 && scale.ay > 0 && scale.az > 0 &&
         pose.is_valid(1e-9);
}

double signed_pow(double c, double e) {
  if (c == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(c), e), c);
}

double inside_outside_local(const Superquadric& sq, const Vec3& p) {
  const double e1 = sq.shape.eps1;
  const double e2 = sq.shape.eps2;
  const double x = std::abs(p.x() / sq.scale.ax);
  const double y = std::abs(p.y() / sq.scale.ay);
  const double z = std::abs(p.z() / sq.scale.az);
  const double xy = std::pow(x, 2.0 / e2) + std::pow(y, 2.0 / e2);
  return std::pow(xy, e2 / e1) + std::pow(z, 2.0 / e1);
}

double implicit_value_local(const Superquadric& sq, const Vec3& p_local) {
  return inside_outside_local(sq, p_local) - 1.0;
}

double implicit_value(const Superquadric& sq, const Vec3& p_world) {
  return implicit_value_local(sq, sq.to_local(p_world));
}

Vec3 implicit_gradient_local(const Superquadric& sq, const Vec3& p) {
  const double e1 = sq.shape.eps1;
  const double e2 = sq.shape.eps2;
  const double x = std::abs(p.x() / sq.scale.ax);
  const double y = std::abs(p.y() / sq.scale.ay);
  const double z = std::abs(p.z() / sq.scale.az);
  const double xy = std::pow(x, 2.0 / e2) + std::pow(y, 2.0 / e2);
  Vec3 g = Vec3::Zero();
  if (xy > 0.0) {
    const double outer = (2.0 / e1) * std::pow(xy, e2 / e1 - 1.0);
    g.x() = outer * std::pow(x, 2.0 / e2 - 1.0) / sq.scale.ax;
    g.y() = outer * std::pow(y, 2.0 / e2 - 1.0) / sq.scale.ay;
    if (x == 0.0) g.x() = 0.0;
    if (y == 0.0) g.y() = 0.0;
    if (p.x() < 0) g.x() = -g.x();
    if (p.y() < 0) g.y() = -g.y();
  }
  if (z > 0.0) {
    g.z() = (2.0 / e1) * std::pow(z, 2.0 / e1 - 1.0) / sq.scale.az;
    if (p.z() < 0) g.z() = -g.z();
  }
  return g;
}

Vec3 surface_point_local(const Superquadric& sq, double eta, double omega) {
  const double e1 = sq.shape.eps1;
  const double e2 = sq.shape.eps2;
  const double ce = signed_pow(std::cos(eta), e1);
  return {sq.scale.ax * ce * signed_pow(std::cos(omega), e2),
          sq.scale.ay * ce * signed_pow(std::sin(omega), e2),
          sq.scale.az * signed_pow(std::sin(eta), e1)};
}

Vec3 surface_point(const Superquadric& sq, double eta, double omega) {
  return sq.to_world(surface_point_local(sq, eta, omega));
}

Vec3 surface_normal(const Superquadric& sq, double eta, double omega) {
  if (std::abs(std::cos(eta)) < 1e-6) {
    // Pole: the field is even in x and y, so the normal is the local z axis.
    return sq.pose.rotation * Vec3(0.0, 0.0, std::sin(eta) >= 0 ? 1.0 : -1.0);
  }
  const Vec3 g = implicit_gradient_local(sq, surface_point_local(sq, eta, omega));
  const double n = g.norm();
  if (!(n >= 1e-12)) throw Error(ErrorCode::PoleSingularity, "gradient norm underflow at surface point");
  return sq.pose.rotation * (g / n);
}

Vec3 normal_at(const Superquadric& sq, const Vec3& p_world) {
  const Vec3 g = implicit_gradient_local(sq, sq.to_local(p_world));
  const double n = g.norm();
  if (!(n >= 1e-12) || !std::isfinite(n)) throw Error(ErrorCode::PoleSingularity, "gradient norm underflow");
  return sq.pose.rotation * (g / n);
}

double eta_from_grid(double alpha, double eps1) {
  return std::atan2(signed_pow(std::sin(alpha), 1.0 / eps1), signed_pow(std::cos(alpha), 1.0 / eps1));
}

double omega_from_grid(double beta, double eps2) {
  return std::atan2(signed_pow(std::sin(beta), 1.0 / eps2), signed_pow(std::cos(beta), 1.0 / eps2));
}

SurfaceSampler::SurfaceSampler(const Superquadric& sq) : sq_(sq) {
  Superquadric local = sq;
  local.pose = Pose{};
  const double da = kPi / kRows;
  const double db = 2.0 * kPi / kCols;
  const double h = 1e-5;
  auto point = [&](double alpha, double beta) {
    return surface_point_local(local, eta_from_grid(alpha, sq.shape.eps1), omega_from_grid(beta, sq.shape.eps2));
  };

  weights_.assign(static_cast<std::size_t>(kRows) * kCols, 0.0);
  row_cum_.assign(kRows + 1, 0.0);
  cell_cum_.assign(static_cast<std::size_t>(kRows) * (kCols + 1), 0.0);
  for (int i = 0; i < kRows; ++i) {
    const double alpha = -kPi / 2 + (i + 0.5) * da;
    double row = 0.0;
    for (int j = 0; j < kCols; ++j) {
      const double beta = -kPi + (j + 0.5) * db;
      const Vec3 d_alpha = (point(alpha + h, beta) - point(alpha - h, beta)) / (2 * h);
      const Vec3 d_beta = (point(alpha, beta + h) - point(alpha, beta - h)) / (2 * h);
      const double w = d_alpha.cross(d_beta).norm() * da * db;
      weights_[static_cast<std::size_t>(i) * kCols + j] = w;
      cell_cum_[static_cast<std::size_t>(i) * (kCols + 1) + j + 1] = row + w;
      row += w;
    }
    row_cum_[i + 1] = row_cum_[i] + row;
  }
  total_ = row_cum_[kRows];
}

namespace {

// Piecewise-linear inverse of a cumulative table cum[0..n]; returns a
// continuous coordinate in [0, n).
double invert_cumulative(const double* cum, int n, double target) {
  const double* it = std::upper_bound(cum, cum + n + 1, target);
  int k = static_cast<int>(it - cum) - 1;
  k = std::clamp(k, 0, n - 1);
  // Zero-mass cells are never selected: step forward to the next massive one.
  while (k < n - 1 && cum[k + 1] <= cum[k]) ++k;
  const double mass = cum[k + 1] - cum[k];
  const double frac = mass > 0 ? std::clamp((target - cum[k]) / mass, 0.0, 1.0) : 0.5;
  return k + frac;
}

}  // namespace

std::pair<double, double> SurfaceSampler::angles(double u, double v) const {
  const double da = kPi / kRows;
  const double db = 2.0 * kPi / kCols;
  const double r = invert_cumulative(row_cum_.data(), kRows, u * total_);
  const int i = std::min(static_cast<int>(r), kRows - 1);
  const double* row = cell_cum_.data() + static_cast<std::size_t>(i) * (kCols + 1);
  const double c = invert_cumulative(row, kCols, v * row[kCols]);
  const double alpha = -kPi / 2 + r * da;
  const double beta = -kPi + c * db;
  return {eta_from_grid(alpha, sq_.shape.eps1), omega_from_grid(beta, sq_.shape.eps2)};
}

PointCloud SurfaceSampler::sample(std::size_t n, std::uint64_t seed) const {
  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = rng.uniform();
    const double v = rng.uniform();
    const auto [eta, omega] = angles(u, v);
    out.points.push_back(surface_point(sq_, eta, omega));
  }
  return out;
}

PointCloud sample_surface(const Superquadric& sq, std::size_t n, std::uint64_t seed) {
  return SurfaceSampler(sq).sample(n, seed);
}

double surface_area(const Superquadric& sq) { return SurfaceSampler(sq).area(); }

SymmetryGroup symmetry_rotations(const Superquadric& sq) {
  SymmetryGroup group;
  const double e1 = sq.shape.eps1;
  const double e2 = sq.shape.eps2;
  const bool exps_equal = std::abs(e1 - e2) <= 0.05;

  std::array<int, 3> perm{0, 1, 2};
  std::vector<Mat3> found;
  do {
    bool allowed = true;
    for (int k = 0; k < 3; ++k) {
      if (!nearly_equal_scale(sq.scale[k], sq.scale[perm[k]])) allowed = false;
    }
    if (perm[2] != 2 && !exps_equal) allowed = false;
    if (!allowed) continue;
    for (int signs = 0; signs < 8; ++signs) {
      Mat3 r = Mat3::Zero();
      for (int k = 0; k < 3; ++k) r(perm[k], k) = (signs >> k & 1) ? -1.0 : 1.0;
      if (r.determinant() > 0) found.push_back(r);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  // Identity first, remaining order is the enumeration order.
  std::stable_partition(found.begin(), found.end(), [](const Mat3& r) { return r.isIdentity(); });
  group.rotations = std::move(found);

  const bool unit1 = std::abs(e1 - 1.0) <= 0.05;
  const bool unit2 = std::abs(e2 - 1.0) <= 0.05;
  const auto& s = sq.scale;
  group.continuous[2] = nearly_equal_scale(s.ax, s.ay) && unit2;
  group.continuous[0] = nearly_equal_scale(s.ay, s.az) && unit1 && unit2;
  group.continuous[1] = nearly_equal_scale(s.ax, s.az) && unit1 && unit2;
  return group;
}

std::vector<Superquadric> equivalent_forms(const Superquadric& sq) {
  Superquadric swapped = sq;
  swapped.scale.ax = sq.scale.ay;
  swapped.scale.ay = sq.scale.ax;
  Mat3 quarter;
  quarter << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  swapped.pose.rotation = sq.pose.rotation * quarter;
  return {sq, swapped};
}

ShapeParams clamp_shape(ShapeParams shape) {
  shape.eps1 = std::clamp(shape.eps1, kEpsMin, kEpsMax);
  shape.eps2 = std::clamp(shape.eps2, kEpsMin, kEpsMax);
  return shape;
}

Mat3 rotation_exp(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    Mat3 k;
    k << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(), omega.x(), 0;
    return Mat3::Identity() + k;
  }
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  const Eigen::Quaterniond q(Mat3(a.transpose() * b));
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

std::array<double, 4> canonical_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return {q.w(), q.x(), q.y(), q.z()};
}

Mat3 rotation_from_quaternion(const std::array<double, 4>& wxyz) {
  Eigen::Quaterniond q(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace sqgrasp
