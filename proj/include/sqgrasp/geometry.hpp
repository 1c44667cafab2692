#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sqgrasp/cloud.hpp"

namespace sqgrasp {

inline constexpr double kEpsMin = 0.1;
inline constexpr double kEpsMax = 1.9;

struct ShapeParams {
  double eps1 = 1.0;
  double eps2 = 1.0;
};

struct ScaleParams {
  double ax = 1.0;
  double ay = 1.0;
  double az = 1.0;

  double operator[](int i) const { return i == 0 ? ax : (i == 1 ? ay : az); }
  double& operator[](int i) { return i == 0 ? ax : (i == 1 ? ay : az); }
  double mean() const { return (ax + ay + az) / 3.0; }
  double min() const;
};

/// Rigid transform: world = rotation * local + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& local) const { return rotation * local + translation; }
  Vec3 inverse_apply(const Vec3& world) const { return rotation.transpose() * (world - translation); }
  Pose inverse() const;
  /// (*this) after other: x -> this(other(x)).
  Pose compose(const Pose& other) const;
  bool is_valid(double tol = 1e-9) const;
};

using RigidTransform = Pose;

/// The 11-parameter primitive: 2 shape exponents, 3 semi-axes, 6 pose.
struct Superquadric {
  ShapeParams shape;
  ScaleParams scale;
  Pose pose;

  Vec3 center() const { return pose.translation; }
  Vec3 to_local(const Vec3& world) const { return pose.inverse_apply(world); }
  Vec3 to_world(const Vec3& local) const { return pose.apply(local); }
  bool is_valid() const;
};

/// sgn(c) * |c|^e.
double signed_pow(double c, double e);

/// Inside-outside function G (surface at G = 1), local frame, with |.|
/// applied to each normalized coordinate.
double inside_outside_local(const Superquadric& sq, const Vec3& p_local);

/// F = G - 1: negative inside, zero on the surface, positive outside.
double implicit_value_local(const Superquadric& sq, const Vec3& p_local);
double implicit_value(const Superquadric& sq, const Vec3& p_world);

/// Gradient of F in the local frame.
Vec3 implicit_gradient_local(const Superquadric& sq, const Vec3& p_local);

Vec3 surface_point_local(const Superquadric& sq, double eta, double omega);
Vec3 surface_point(const Superquadric& sq, double eta, double omega);

/// Outward unit normal in world frame at parameters (eta, omega).
/// Throws PoleSingularity if the gradient norm underflows.
Vec3 surface_normal(const Superquadric& sq, double eta, double omega);

/// Outward unit normal in world frame at an arbitrary world point (the
/// normalized gradient of F there).
Vec3 normal_at(const Superquadric& sq, const Vec3& p_world);

/// Area-corrected sampler over a 64 x 128 grid of (eta, omega) cells. The
/// grid coordinates are the normalized polar angles of the surface point,
/// mapped to (eta, omega) through the exponents, so cells stay compact on
/// box-like shapes. Cells are drawn by piecewise-linear inverse CDF, which
/// keeps the sample set a continuous function of the parameters for a fixed
/// seed.
class SurfaceSampler {
 public:
  static constexpr int kRows = 64;
  static constexpr int kCols = 128;

  explicit SurfaceSampler(const Superquadric& sq);

  double area() const { return total_; }
  /// Parameter pair for a unit-square draw (u, v).
  std::pair<double, double> angles(double u, double v) const;
  PointCloud sample(std::size_t n, std::uint64_t seed) const;

 private:
  Superquadric sq_;
  std::vector<double> weights_;   // kRows * kCols cell areas
  std::vector<double> row_cum_;   // kRows + 1
  std::vector<double> cell_cum_;  // kRows * (kCols + 1)
  double total_ = 0.0;
};

double eta_from_grid(double alpha, double eps1);
double omega_from_grid(double beta, double eps2);

PointCloud sample_surface(const Superquadric& sq, std::size_t n, std::uint64_t seed);

/// Numerically integrated surface area (m^2).
double surface_area(const Superquadric& sq);

struct SymmetryGroup {
  std::vector<Mat3> rotations;            // finite part, identity first
  std::array<bool, 3> continuous{false, false, false};  // per local axis

  bool any_continuous() const { return continuous[0] || continuous[1] || continuous[2]; }
  bool all_continuous() const { return continuous[0] && continuous[1] && continuous[2]; }
};

/// Local-frame rotations S with F(S p) = F(p), detected with 1% scale and
/// 0.05 exponent tolerances.
SymmetryGroup symmetry_rotations(const Superquadric& sq);

/// Exact reparametrizations describing the same surface: the input itself
/// and the x/y swap (ax <-> ay with a quarter turn about local z).
std::vector<Superquadric> equivalent_forms(const Superquadric& sq);

/// Clamps exponents to [kEpsMin, kEpsMax].
ShapeParams clamp_shape(ShapeParams shape);

// Rotation helpers.
Mat3 rotation_exp(const Vec3& omega);
Mat3 axis_angle(const Vec3& axis, double angle);
/// Geodesic angle between two rotations, radians.
double rotation_angle(const Mat3& a, const Mat3& b);
/// Unit quaternion with w >= 0 as [w, x, y, z].
std::array<double, 4> canonical_quaternion(const Mat3& r);
Mat3 rotation_from_quaternion(const std::array<double, 4>& wxyz);

}  // namespace sqgrasp
