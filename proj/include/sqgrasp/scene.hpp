#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sqgrasp/cloud.hpp"
#include "sqgrasp/geometry.hpp"

namespace sqgrasp {

/// Open-top box. The bin frame has its origin at the center of the floor's
/// top face, z up; the inner volume is [-x/2, x/2] x [-y/2, y/2] x [0, h].
struct BinSpec {
  double inner_x = 0.36;
  double inner_y = 0.28;
  double wall_height = 0.12;
  double wall_thickness = 0.01;
  Pose pose;

  void validate() const;
  /// Axis-aligned solid pieces in the bin frame as (lo, hi): floor slab then
  /// the four walls.
  std::vector<std::pair<Vec3, Vec3>> solids() const;
  Vec3 up() const { return pose.rotation.col(2); }
};

/// Pinhole camera. Camera frame: x right, y down, z along the optical axis.
struct CameraSpec {
  Pose pose;
  double focal = 600.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
  double near_clip = 0.05;
  double far_clip = 3.0;

  void validate() const;
  Vec3 position() const { return pose.translation; }
  Vec3 optical_axis() const { return pose.rotation.col(2); }
  /// Pixel coordinates and depth along the optical axis; false behind the
  /// camera or outside the clip range.
  bool project(const Vec3& world, double& u, double& v, double& depth) const;
  /// World-frame unit ray through pixel (u, v).
  Vec3 ray(double u, double v) const;
};

struct SceneObject {
  int id = 0;
  Superquadric sq;
};

struct Scene {
  BinSpec bin;
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
  /// Set when fewer objects than requested could be placed.
  bool incomplete = false;

  const SceneObject* find(int id) const;
};

struct SceneConfig {
  double eps_lo = 0.2;
  double eps_hi = 1.8;
  double scale_lo = 0.015;
  double scale_hi = 0.06;
  int max_attempts = 200;
  double penetration_tol = -0.05;
  std::size_t overlap_samples = 2000;
};

/// Rejection placement of random upright superquadrics on the bin floor.
/// Throws PlacementFailure only when nothing could be placed.
Scene generate_scene(const BinSpec& bin, int n_objects, std::uint64_t seed, const SceneConfig& cfg = {});

/// True when some surface sample of a has F < tol under b, or vice versa.
bool interpenetrates(const Superquadric& a, const Superquadric& b, double tol, std::size_t samples,
                     std::uint64_t seed);

/// Six views: 0 is straight down over the bin center, 1-5 are tilted by up to
/// jitter_deg at random azimuths and aimed at the bin center.
std::vector<CameraSpec> sample_viewpoints(const BinSpec& bin, double base_height, double jitter_deg,
                                          std::uint64_t seed);

struct DatasetSample {
  PointCloud partial_cloud;
  Superquadric gt;
  int object_id = 0;
  int view_id = 0;
  double occlusion_ratio = 0.0;
};

struct RenderConfig {
  std::size_t min_samples = 20000;
  double samples_per_pixel = 6.0;  // target density over the projected area
  double depth_tol = 0.002;
  std::uint64_t seed = 0;
};

/// Per-object partial clouds of one view. Objects that end up with no
/// visible point are omitted.
std::vector<DatasetSample> render_partial_cloud(const Scene& scene, const CameraSpec& cam, int view_id,
                                                const RenderConfig& cfg = {});

struct AugmentConfig {
  double scale_lo = 0.5;
  double scale_hi = 2.0;
  double scale_step = 0.05;
  double noise_lo = 0.001;
  double noise_hi = 0.005;
  double footprint_x = 0.36;
  double footprint_y = 0.28;
  bool enable_scale = true;
  bool enable_noise = true;
  bool enable_translate = true;
};

/// Scale along the object's own axes, add isotropic noise, translate.
DatasetSample augment(const DatasetSample& sample, std::uint64_t seed, const AugmentConfig& cfg = {});

struct DatasetConfig {
  int n_scenes = 100;
  int n_objects = 5;
  double camera_height = 0.7;
  double jitter_deg = 15.0;
  double noise_sigma = 0.002;  // sensor noise added after visibility
  bool augment = false;
  AugmentConfig augment_cfg;
  RenderConfig render;
};

struct ManifestRow {
  int scene = 0;
  int view = 0;
  int object = 0;
  double occlusion_ratio = 0.0;
  std::string cloud_path;  // relative to the dataset root
  std::string gt_path;
};

struct Manifest {
  int format = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> scene_paths;
  std::vector<ManifestRow> rows;
};

/// Renders scenes x views and writes the dataset tree plus manifest.json.
/// Throws IoFailure naming the path.
Manifest export_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& out_dir,
                        const DatasetConfig& cfg, std::uint64_t seed);

std::string scene_dir_name(int scene);

}  // namespace sqgrasp
