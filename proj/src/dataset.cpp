#include <cstdio>
#include <filesystem>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/io.hpp"
#include "sqgrasp/rng.hpp"
#include "sqgrasp/scene.hpp"

namespace sqgrasp {

namespace {

struct ViewOutput {
  CameraSpec cam;
  std::vector<DatasetSample> samples;
};

std::vector<ViewOutput> render_scene(const Scene& scene, int index, const DatasetConfig& cfg, std::uint64_t seed) {
  const auto cams = sample_viewpoints(scene.bin, cfg.camera_height, cfg.jitter_deg,
                                      derive_seed(seed, "view", {static_cast<std::uint64_t>(index)}));
  std::vector<ViewOutput> views(cams.size());
  const auto n = static_cast<std::ptrdiff_t>(cams.size());
  const auto si = static_cast<std::uint64_t>(index);
  // Each view touches only its own slot; exceptions cannot cross the region,
  // so the first failure is parked and rethrown afterwards.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    try {
      const auto vj = static_cast<std::uint64_t>(j);
      RenderConfig rc = cfg.render;
      rc.seed = derive_seed(seed, "render", {si, vj});
      ViewOutput v{cams[j], render_partial_cloud(scene, cams[j], static_cast<int>(j), rc)};
      for (auto& s : v.samples) {
        const auto oid = static_cast<std::uint64_t>(s.object_id);
        Rng rng(derive_seed(seed, "noise", {si, vj, oid}));
        for (auto& p : s.partial_cloud.points) {
          const double nx = rng.normal();
          const double ny = rng.normal();
          const double nz = rng.normal();
          p += cfg.noise_sigma * Vec3(nx, ny, nz);
        }
        if (cfg.augment) s = augment(s, derive_seed(seed, "augment", {si, vj, oid}), cfg.augment_cfg);
      }
      views[j] = std::move(v);
    } catch (...) {
#pragma omp critical(dataset_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return views;
}

io::Json camera_json(const CameraSpec& cam) {
  return {{"pose", io::to_json(cam.pose)}, {"focal", cam.focal}, {"cx", cam.cx},          {"cy", cam.cy},
          {"width", cam.width},           {"height", cam.height}, {"near", cam.near_clip}, {"far", cam.far_clip}};
}

}  // namespace

Manifest export_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& out_dir,
                        const DatasetConfig& cfg, std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());

  Manifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const int si = static_cast<int>(i);
    const std::string sdir = scene_dir_name(si);
    m.scene_paths.push_back(sdir + "/scene.json");
    io::write_text_atomic(out_dir / sdir / "scene.json", io::dump(io::to_json(scenes[i])));

    const auto views = render_scene(scenes[i], si, cfg, seed);
    for (std::size_t j = 0; j < views.size(); ++j) {
      const std::string vdir = sdir + "/view_" + std::to_string(j);
      io::write_text_atomic(out_dir / vdir / "camera.json", io::dump(camera_json(views[j].cam)));
      for (const auto& s : views[j].samples) {
        const std::string stem = vdir + "/obj_" + std::to_string(s.object_id);
        io::write_cloud(out_dir / (stem + ".ply"), s.partial_cloud);
        const io::Json gt = {{"format", 1},
                             {"scene", si},
                             {"view", static_cast<int>(j)},
                             {"object", s.object_id},
                             {"occlusion_ratio", s.occlusion_ratio},
                             {"camera_position", {views[j].cam.position().x(), views[j].cam.position().y(),
                                                  views[j].cam.position().z()}},
                             {"augmented", cfg.augment},
                             {"sq", io::to_json(s.gt)}};
        io::write_text_atomic(out_dir / (stem + ".json"), io::dump(gt));
        m.rows.push_back({si, static_cast<int>(j), s.object_id, s.occlusion_ratio, stem + ".ply", stem + ".json"});
      }
    }
  }
  io::write_text_atomic(out_dir / "manifest.json", io::dump(io::to_json(m)));
  return m;
}

}  // namespace sqgrasp
