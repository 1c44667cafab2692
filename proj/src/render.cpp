#include <algorithm>
#include <cmath>
#include <limits>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/rng.hpp"
#include "sqgrasp/scene.hpp"

namespace sqgrasp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kBinId = -1;
constexpr int kNoId = -2;
constexpr std::size_t kMaxSamples = 400000;

struct Splat {
  int pixel;
  double depth;
  Vec3 point;
};

struct DepthBuffer {
  int width;
  int height;
  std::vector<double> depth;
  std::vector<int> id;

  DepthBuffer(int w, int h) : width(w), height(h), depth(std::size_t(w) * h, kInf), id(std::size_t(w) * h, kNoId) {}

  void write(int px, int py, double d, int who) {
    if (px < 0 || py < 0 || px >= width || py >= height) return;
    const std::size_t k = std::size_t(py) * width + px;
    if (d < depth[k]) {
      depth[k] = d;
      id[k] = who;
    }
  }
};

// Slab test, entry distance or inf.
double ray_box(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0;
  double t1 = kInf;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < lo[k] || o[k] > hi[k]) return kInf;
      continue;
    }
    double a = (lo[k] - o[k]) / d[k];
    double b = (hi[k] - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return kInf;
  }
  return t0;
}

void rasterize_bin(const BinSpec& bin, const CameraSpec& cam, DepthBuffer& buf) {
  const auto solids = bin.solids();
  const Vec3 o = bin.pose.inverse_apply(cam.position());
  const Vec3 axis = cam.optical_axis();
  for (int py = 0; py < cam.height; ++py) {
    for (int px = 0; px < cam.width; ++px) {
      const Vec3 dw = cam.ray(px, py);
      const Vec3 d = bin.pose.rotation.transpose() * dw;
      double t = kInf;
      for (const auto& [lo, hi] : solids) t = std::min(t, ray_box(o, d, lo, hi));
      if (t < kInf) buf.write(px, py, t * dw.dot(axis), kBinId);
    }
  }
}

// Camera-facing surface samples of one object, projected. The sample count
// tracks the object's footprint so the front surface has no pixel holes.
std::vector<Splat> splat_object(const Superquadric& sq, const CameraSpec& cam, const RenderConfig& cfg,
                                std::uint64_t seed) {
  double u, v, center_depth;
  if (!cam.project(sq.center(), u, v, center_depth)) center_depth = std::max(cam.near_clip, 0.1);
  const double pixel = center_depth / cam.focal;
  const double area = surface_area(sq);
  const auto wanted = static_cast<std::size_t>(cfg.samples_per_pixel * area / (pixel * pixel));
  const std::size_t n = std::clamp(wanted, cfg.min_samples, std::max(cfg.min_samples, kMaxSamples));
  const PointCloud pts = sample_surface(sq, n, seed);

  std::vector<Splat> out;
  out.reserve(n / 2);
  const Vec3 eye = cam.position();
  for (const auto& p : pts.points) {
    if (normal_at(sq, p).dot(eye - p) <= 0) continue;
    double pu, pv, d;
    if (!cam.project(p, pu, pv, d)) continue;
    const int px = static_cast<int>(std::floor(pu));
    const int py = static_cast<int>(std::floor(pv));
    if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
    out.push_back({py * cam.width + px, d, p});
  }
  return out;
}

struct ViewResult {
  std::vector<PointCloud> clouds;  // per object, scene order
};

ViewResult render_view(const Scene& scene, const CameraSpec& cam, const RenderConfig& cfg,
                       const std::vector<std::size_t>& subset, bool with_bin) {
  DepthBuffer buf(cam.width, cam.height);
  if (with_bin) rasterize_bin(scene.bin, cam, buf);

  std::vector<std::vector<Splat>> splats(subset.size());
  for (std::size_t s = 0; s < subset.size(); ++s) {
    const auto& obj = scene.objects[subset[s]];
    splats[s] = splat_object(obj.sq, cam, cfg,
                             derive_seed(cfg.seed ^ scene.seed, "render", {static_cast<std::uint64_t>(obj.id)}));
    // 3x3 footprint closes gaps an occluded surface could leak through.
    for (const auto& sp : splats[s]) {
      const int px = sp.pixel % cam.width;
      const int py = sp.pixel / cam.width;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) buf.write(px + dx, py + dy, sp.depth, static_cast<int>(s));
    }
  }

  // Nearest visible sample per pixel across all objects.
  std::vector<double> best_depth(buf.depth.size(), kInf);
  std::vector<int> best_obj(buf.depth.size(), kNoId);
  std::vector<const Splat*> best_splat(buf.depth.size(), nullptr);
  for (std::size_t s = 0; s < subset.size(); ++s) {
    for (const auto& sp : splats[s]) {
      const auto k = static_cast<std::size_t>(sp.pixel);
      const bool visible = buf.id[k] == static_cast<int>(s) || sp.depth <= buf.depth[k] + cfg.depth_tol;
      if (!visible || sp.depth >= best_depth[k]) continue;
      best_depth[k] = sp.depth;
      best_obj[k] = static_cast<int>(s);
      best_splat[k] = &sp;
    }
  }
  ViewResult out;
  out.clouds.resize(subset.size());
  for (std::size_t k = 0; k < best_obj.size(); ++k)
    if (best_obj[k] >= 0) out.clouds[best_obj[k]].push_back(best_splat[k]->point, scene.objects[subset[best_obj[k]]].id);
  return out;
}

}  // namespace

std::vector<DatasetSample> render_partial_cloud(const Scene& scene, const CameraSpec& cam, int view_id,
                                                const RenderConfig& cfg) {
  cam.validate();
  std::vector<std::size_t> all(scene.objects.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const ViewResult full = render_view(scene, cam, cfg, all, true);

  std::vector<DatasetSample> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (full.clouds[i].empty()) continue;
    const ViewResult alone = render_view(scene, cam, cfg, {i}, false);
    DatasetSample s;
    s.partial_cloud = full.clouds[i];
    s.gt = scene.objects[i].sq;
    s.object_id = scene.objects[i].id;
    s.view_id = view_id;
    const double expected = static_cast<double>(alone.clouds[0].size());
    const double seen = static_cast<double>(s.partial_cloud.size());
    s.occlusion_ratio = expected > 0 ? std::clamp(1.0 - seen / expected, 0.0, 1.0) : 1.0;
    out.push_back(std::move(s));
  }
  return out;
}

DatasetSample augment(const DatasetSample& sample, std::uint64_t seed, const AugmentConfig& cfg) {
  Rng rng(seed);
  DatasetSample out = sample;
  const Superquadric& gt = sample.gt;
  const Vec3 c = gt.center();

  if (cfg.enable_scale) {
    const auto steps = static_cast<std::uint64_t>(std::llround((cfg.scale_hi - cfg.scale_lo) / cfg.scale_step));
    Vec3 s;
    for (int k = 0; k < 3; ++k) s[k] = cfg.scale_lo + cfg.scale_step * static_cast<double>(rng.below(steps + 1));
    // Along the object's own axes, so the result is still a superquadric.
    const Mat3 m = gt.pose.rotation * s.asDiagonal() * gt.pose.rotation.transpose();
    for (auto& p : out.partial_cloud.points) p = c + m * (p - c);
    for (int k = 0; k < 3; ++k) out.gt.scale[k] = gt.scale[k] * s[k];
  }
  if (cfg.enable_noise) {
    const double sigma = rng.uniform(cfg.noise_lo, cfg.noise_hi);
    for (auto& p : out.partial_cloud.points) {
      const double nx = rng.normal();
      const double ny = rng.normal();
      const double nz = rng.normal();
      p += sigma * Vec3(nx, ny, nz);
    }
  }
  if (cfg.enable_translate) {
    const Vec3 target(rng.uniform(-0.5 * cfg.footprint_x, 0.5 * cfg.footprint_x),
                      rng.uniform(-0.5 * cfg.footprint_y, 0.5 * cfg.footprint_y), c.z());
    const Vec3 shift = target - c;
    for (auto& p : out.partial_cloud.points) p += shift;
    out.gt.pose.translation += shift;
  }
  return out;
}

}  // namespace sqgrasp
