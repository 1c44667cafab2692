#include "sqgrasp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/rng.hpp"

namespace sqgrasp {

void BinSpec::validate() const {
  if (!(inner_x > 0 && inner_y > 0 && wall_height > 0 && wall_thickness > 0))
    throw Error(ErrorCode::Usage, "bin dimensions must be positive");
  if (!pose.is_valid()) throw Error(ErrorCode::Usage, "bin pose is not a rigid transform");
}

std::vector<std::pair<Vec3, Vec3>> BinSpec::solids() const {
  const double hx = 0.5 * inner_x;
  const double hy = 0.5 * inner_y;
  const double t = wall_thickness;
  const double h = wall_height;
  return {
      {Vec3(-hx - t, -hy - t, -t), Vec3(hx + t, hy + t, 0.0)},
      {Vec3(-hx - t, -hy - t, 0.0), Vec3(-hx, hy + t, h)},
      {Vec3(hx, -hy - t, 0.0), Vec3(hx + t, hy + t, h)},
      {Vec3(-hx, -hy - t, 0.0), Vec3(hx, -hy, h)},
      {Vec3(-hx, hy, 0.0), Vec3(hx, hy + t, h)},
  };
}

void CameraSpec::validate() const {
  if (!(focal > 0)) throw Error(ErrorCode::Usage, "camera focal length must be positive");
  if (width < 64 || height < 64) throw Error(ErrorCode::Usage, "camera resolution below 64x64");
  if (!(near_clip > 0 && near_clip < far_clip)) throw Error(ErrorCode::Usage, "camera clip range out of order");
  if (!pose.is_valid()) throw Error(ErrorCode::Usage, "camera pose is not a rigid transform");
}

bool CameraSpec::project(const Vec3& world, double& u, double& v, double& depth) const {
  const Vec3 c = pose.inverse_apply(world);
  depth = c.z();
  if (!(depth >= near_clip && depth <= far_clip)) return false;
  u = cx + focal * c.x() / depth;
  v = cy + focal * c.y() / depth;
  return true;
}

Vec3 CameraSpec::ray(double u, double v) const {
  return (pose.rotation * Vec3((u - cx) / focal, (v - cy) / focal, 1.0)).normalized();
}

const SceneObject* Scene::find(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

namespace {

bool any_below(const PointCloud& samples, const Superquadric& other, double tol) {
  for (const auto& p : samples.points)
    if (implicit_value(other, p) < tol) return true;
  return false;
}

bool inside_footprint(const PointCloud& samples, const BinSpec& bin) {
  const double hx = 0.5 * bin.inner_x;
  const double hy = 0.5 * bin.inner_y;
  for (const auto& p : samples.points) {
    const Vec3 q = bin.pose.inverse_apply(p);
    if (std::abs(q.x()) > hx || std::abs(q.y()) > hy) return false;
  }
  return true;
}

}  // namespace

bool interpenetrates(const Superquadric& a, const Superquadric& b, double tol, std::size_t samples,
                     std::uint64_t seed) {
  return any_below(sample_surface(a, samples, seed), b, tol) ||
         any_below(sample_surface(b, samples, seed + 1), a, tol);
}

Scene generate_scene(const BinSpec& bin, int n_objects, std::uint64_t seed, const SceneConfig& cfg) {
  if (n_objects < 1) throw Error(ErrorCode::Usage, "n_objects must be >= 1");
  bin.validate();
  Scene scene;
  scene.bin = bin;
  scene.seed = seed;

  std::vector<PointCloud> placed_samples;
  for (int k = 0; k < n_objects; ++k) {
    Rng rng(derive_seed(seed, "object", {static_cast<std::uint64_t>(k)}));
    // Shape is drawn once per object, the attempts only move it.
    Superquadric sq;
    sq.shape = {rng.uniform(cfg.eps_lo, cfg.eps_hi), rng.uniform(cfg.eps_lo, cfg.eps_hi)};
    sq.scale = {rng.uniform(cfg.scale_lo, cfg.scale_hi), rng.uniform(cfg.scale_lo, cfg.scale_hi),
                rng.uniform(cfg.scale_lo, cfg.scale_hi)};
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !ok; ++attempt) {
      const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double x = rng.uniform(-0.5 * bin.inner_x, 0.5 * bin.inner_x);
      const double y = rng.uniform(-0.5 * bin.inner_y, 0.5 * bin.inner_y);
      // Upright, so the lowest surface point is the south pole at -az.
      Pose local;
      local.rotation = axis_angle(Vec3::UnitZ(), yaw);
      local.translation = Vec3(x, y, sq.scale.az);
      sq.pose = bin.pose.compose(local);

      const PointCloud samples =
          sample_surface(sq, cfg.overlap_samples, derive_seed(seed, "overlap", {static_cast<std::uint64_t>(k)}));
      if (!inside_footprint(samples, bin)) continue;
      bool clash = false;
      for (std::size_t j = 0; j < scene.objects.size() && !clash; ++j)
        clash = any_below(samples, scene.objects[j].sq, cfg.penetration_tol) ||
                any_below(placed_samples[j], sq, cfg.penetration_tol);
      if (clash) continue;
      ok = true;
      scene.objects.push_back({k, sq});
      placed_samples.push_back(samples);
    }
    if (!ok) scene.incomplete = true;
  }
  if (scene.objects.empty()) throw Error(ErrorCode::PlacementFailure, "no object could be placed");
  return scene;
}

std::vector<CameraSpec> sample_viewpoints(const BinSpec& bin, double base_height, double jitter_deg,
                                          std::uint64_t seed) {
  if (!(base_height > bin.wall_height)) throw Error(ErrorCode::Usage, "camera must sit above the bin walls");
  const Vec3 center = bin.pose.translation;
  const Vec3 up = bin.up();
  Rng rng(derive_seed(seed, "viewpoints"));
  std::vector<CameraSpec> out;
  for (int view = 0; view < 6; ++view) {
    CameraSpec cam;
    Vec3 dir = up;
    if (view > 0) {
      const double tilt = jitter_deg * (1.0 - rng.uniform()) * std::numbers::pi / 180.0;
      const double azimuth = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const Vec3 local(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth), std::cos(tilt));
      dir = bin.pose.rotation * local;
    }
    cam.pose.translation = center + base_height * dir;
    const Vec3 z = -dir;
    // Image x follows the bin x axis as closely as the tilt allows.
    const Vec3 bx = bin.pose.rotation.col(0);
    const Vec3 x = (bx - bx.dot(z) * z).normalized();
    const Vec3 y = z.cross(x);
    cam.pose.rotation.col(0) = x;
    cam.pose.rotation.col(1) = y;
    cam.pose.rotation.col(2) = z;
    out.push_back(cam);
  }
  return out;
}

std::string scene_dir_name(int scene) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", scene);
  return buf;
}

}  // namespace sqgrasp
