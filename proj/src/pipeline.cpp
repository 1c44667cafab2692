#include "sqgrasp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <regex>
#include <set>
#include <tuple>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/rng.hpp"

namespace sqgrasp {

namespace fs = std::filesystem;
using io::Json;

namespace {

template <typename T>
void take(const Json& j, const char* key, T& v) {
  if (!j.contains(key)) return;
  try {
    v = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::ParseError, std::string("config field '") + key + "' has the wrong type");
  }
}

void take(const Json& j, const char* key, Vec3& v) {
  std::vector<double> a;
  take(j, key, a);
  if (!j.contains(key)) return;
  if (a.size() != 3) throw Error(ErrorCode::ParseError, std::string("config field '") + key + "' needs 3 numbers");
  v = Vec3(a[0], a[1], a[2]);
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw Error(ErrorCode::ParseError, std::string("config section '") + key + "' must be an object");
  return j.at(key);
}

Json vec(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

Json fit_json(const FitConfig& f) {
  return {{"max_iter", f.max_iter},
          {"param_tol", f.param_tol},
          {"n_starts", f.n_starts},
          {"eps_min", f.eps_min},
          {"eps_max", f.eps_max},
          {"scale_min", f.scale_min},
          {"scale_max", f.scale_max},
          {"enable_pre", f.enable_pre},
          {"enable_post", f.enable_post},
          {"sample_n", f.sample_n},
          {"view_dir", vec(f.view_dir)},
          {"partial_view", f.partial_view},
          {"region_cell_area", f.region_cell_area},
          {"post_min_gain", f.post_min_gain},
          {"outliers",
           {{"plane_tol", f.outliers.plane_tol},
            {"ransac_iterations", f.outliers.ransac_iterations},
            {"floor_frac", f.outliers.floor_frac},
            {"radius", f.outliers.radius},
            {"min_neighbors", f.outliers.min_neighbors},
            {"up", vec(f.outliers.up)},
            {"floor_max_tilt_deg", f.outliers.floor_max_tilt_deg},
            {"seed", f.outliers.seed}}},
          {"icp", {{"max_iter", f.icp.max_iter}, {"rel_tol", f.icp.rel_tol}}}};
}

void read_fit(const Json& j, FitConfig& f) {
  take(j, "max_iter", f.max_iter);
  take(j, "param_tol", f.param_tol);
  take(j, "n_starts", f.n_starts);
  take(j, "eps_min", f.eps_min);
  take(j, "eps_max", f.eps_max);
  take(j, "scale_min", f.scale_min);
  take(j, "scale_max", f.scale_max);
  take(j, "enable_pre", f.enable_pre);
  take(j, "enable_post", f.enable_post);
  take(j, "sample_n", f.sample_n);
  take(j, "view_dir", f.view_dir);
  take(j, "partial_view", f.partial_view);
  take(j, "region_cell_area", f.region_cell_area);
  take(j, "post_min_gain", f.post_min_gain);
  const Json& o = section(j, "outliers");
  take(o, "plane_tol", f.outliers.plane_tol);
  take(o, "ransac_iterations", f.outliers.ransac_iterations);
  take(o, "floor_frac", f.outliers.floor_frac);
  take(o, "radius", f.outliers.radius);
  take(o, "min_neighbors", f.outliers.min_neighbors);
  take(o, "up", f.outliers.up);
  take(o, "floor_max_tilt_deg", f.outliers.floor_max_tilt_deg);
  take(o, "seed", f.outliers.seed);
  const Json& i = section(j, "icp");
  take(i, "max_iter", f.icp.max_iter);
  take(i, "rel_tol", f.icp.rel_tol);
}

Json gripper_json(const GripperSpec& g) {
  return {{"max_width", g.max_width},       {"finger_length", g.finger_length}, {"finger_thickness", g.finger_thickness},
          {"palm_depth", g.palm_depth},     {"friction_mu", g.friction_mu},     {"clearance", g.clearance},
          {"tip_margin", g.tip_margin},     {"slide_step", g.slide_step},       {"sweep_step_deg", g.sweep_step_deg},
          {"grid_step", g.grid_step}};
}

void read_gripper(const Json& j, GripperSpec& g) {
  take(j, "max_width", g.max_width);
  take(j, "finger_length", g.finger_length);
  take(j, "finger_thickness", g.finger_thickness);
  take(j, "palm_depth", g.palm_depth);
  take(j, "friction_mu", g.friction_mu);
  take(j, "clearance", g.clearance);
  take(j, "tip_margin", g.tip_margin);
  take(j, "slide_step", g.slide_step);
  take(j, "sweep_step_deg", g.sweep_step_deg);
  take(j, "grid_step", g.grid_step);
}

// ---- dataset access

struct Dataset {
  fs::path root;
  Manifest manifest;
};

Dataset open_dataset(const fs::path& dir) {
  const fs::path mpath = fs::is_regular_file(dir) ? dir : dir / "manifest.json";
  Dataset d{mpath.parent_path(), io::manifest_from_json(io::read_json(mpath))};
  return d;
}

Scene load_scene(const Dataset& d, int index) {
  if (index < 0 || index >= static_cast<int>(d.manifest.scene_paths.size()))
    throw Error(ErrorCode::Usage, "scene " + std::to_string(index) + " is not in the manifest");
  return io::scene_from_json(io::read_json(d.root / d.manifest.scene_paths[index]));
}

struct Prepared {
  PointCloud cloud;  // after pre-processing when enabled
  FitConfig fit;
};

FitConfig config_for(const RunConfig& cfg, const Json& sidecar, const PointCloud& cloud, int scene, int view,
                     int object) {
  FitConfig fc = cfg.fit;
  fc.sample_seed = fit_seed(cfg.seed, scene, view, object);
  if (sidecar.contains("camera_position") && !cloud.empty()) {
    const auto c = sidecar.at("camera_position").get<std::vector<double>>();
    if (c.size() == 3) {
      const Vec3 d = cloud.centroid() - Vec3(c[0], c[1], c[2]);
      if (d.norm() > 0) fc.view_dir = d.normalized();
    }
  }
  return fc;
}

Prepared prepare(const Dataset& d, const ManifestRow& row, const RunConfig& cfg) {
  const PointCloud raw = io::read_cloud(d.root / row.cloud_path);
  const Json side = io::read_json(d.root / row.gt_path);
  Prepared p{raw, config_for(cfg, side, raw, row.scene, row.view, row.object)};
  if (p.fit.enable_pre) p.cloud = preprocess(raw, p.fit);
  return p;
}

FitResult fit_prepared(const Prepared& p) { return fit_superquadric(p.cloud, p.fit); }

// One row per (scene, object): the requested view, or the least occluded.
std::vector<ManifestRow> choose_rows(const Manifest& m, int scene, int view) {
  std::map<int, ManifestRow> pick;
  for (const auto& r : m.rows) {
    if (r.scene != scene) continue;
    if (view >= 0 && r.view != view) continue;
    auto it = pick.find(r.object);
    const bool better = it == pick.end() || r.occlusion_ratio < it->second.occlusion_ratio ||
                        (r.occlusion_ratio == it->second.occlusion_ratio && r.view < it->second.view);
    if (better) pick[r.object] = r;
  }
  std::vector<ManifestRow> out;
  for (auto& [id, r] : pick) out.push_back(r);
  return out;
}

std::vector<int> selected_scenes(const Dataset& d, const RunConfig& cfg) {
  std::vector<int> out;
  if (cfg.scene_index >= 0) {
    load_scene(d, cfg.scene_index);
    out.push_back(cfg.scene_index);
    return out;
  }
  for (int i = 0; i < static_cast<int>(d.manifest.scene_paths.size()); ++i) out.push_back(i);
  return out;
}

std::string view_dir_name(int view) { return "view_" + std::to_string(view); }

Json fit_file_json(const ObjectFit& o) {
  Json j = io::to_json(o.fit);
  j["scene"] = o.scene;
  j["view"] = o.view;
  j["object"] = o.object;
  return j;
}

std::string plan_csv(const GraspPlan& plan) {
  std::string out = "step,object_id,success,width_m,priority,family,cx,cy,cz\n";
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& s = plan.steps[i];
    const Vec3 c = s.cand.center();
    out += std::to_string(i) + "," + std::to_string(s.object_id) + "," + (s.success ? "1" : "0") + "," +
           num(s.cand.width) + "," + num(s.cand.priority) + "," + std::to_string(s.cand.family) + "," + num(c.x()) +
           "," + num(c.y()) + "," + num(c.z()) + "\n";
  }
  return out;
}

// Every sampled candidate with its priority and whether it survives the
// region threshold, for plotting.
std::string priority_csv(const std::vector<ObjectFit>& fits, const RunConfig& cfg) {
  std::string out = "object_id,candidate,family,priority,width_m,region_a,region_b,score_a,score_b,passes\n";
  for (const auto& o : fits) {
    std::vector<GraspCandidate> cands;
    try {
      cands = sample_candidates(o.fit.sq, cfg.gripper);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoFeasibleGrasp) throw;
      continue;
    }
    const double sigma = cfg.sigma > 0 ? cfg.sigma : default_sigma(o.fit.sample_n ? o.fit.sample_n : 1);
    const auto kept = filter_by_quality(cands, o.fit, sigma);
    std::set<int> pass;
    for (const auto& c : kept) pass.insert(c.index);
    for (const auto& c : cands) {
      auto score = [&](int r) {
        return r >= 0 && r < static_cast<int>(o.fit.regions.scores.size()) ? o.fit.regions.scores[r] : 0.0;
      };
      out += std::to_string(o.object) + "," + std::to_string(c.index) + "," + std::to_string(c.family) + "," +
             num(c.priority) + "," + num(c.width) + "," + std::to_string(c.regions[0]) + "," +
             std::to_string(c.regions[1]) + "," + num(score(c.regions[0])) + "," + num(score(c.regions[1])) + "," +
             (pass.count(c.index) ? "1" : "0") + "\n";
    }
  }
  return out;
}

void write_scene_run(const SceneRun& run, const fs::path& out, const RunConfig& cfg) {
  const fs::path sdir = out / scene_dir_name(run.scene);
  for (const auto& o : run.fits) {
    const fs::path stem = sdir / view_dir_name(o.view) / ("obj_" + std::to_string(o.object));
    io::write_text_atomic(stem.string() + ".json", io::dump(fit_file_json(o)));
    if (cfg.dump_clouds) io::write_cloud(stem.string() + "_fit.ply", sample_surface(o.fit.sq, 2000, o.fit.sample_seed));
  }
  Json plan = io::to_json(run.plan);
  plan["scene"] = run.scene;
  plan["skipped"] = run.skipped;
  io::write_text_atomic(sdir / "plan.json", io::dump(plan));
  io::write_text_atomic(sdir / "plan.csv", plan_csv(run.plan));
  io::write_text_atomic(sdir / "priorities.csv", priority_csv(run.fits, cfg));
}

PlanConfig plan_config(const RunConfig& cfg) {
  PlanConfig pc = cfg.plan;
  pc.sigma = cfg.sigma;
  return pc;
}

SceneRun plan_fits(const Scene& scene, int index, std::vector<ObjectFit> fits, std::vector<std::string> skipped,
                   const RunConfig& cfg) {
  SceneRun run;
  run.scene = index;
  run.fits = std::move(fits);
  run.skipped = std::move(skipped);
  std::map<int, FitResult> by_id;
  for (const auto& o : run.fits) by_id[o.object] = o.fit;
  run.plan = plan_scene(scene, by_id, cfg.gripper, plan_config(cfg));
  return run;
}

bool fit_failure(const Error& e) {
  return e.code() == ErrorCode::EmptyCloud || e.code() == ErrorCode::DegenerateCloud ||
         e.code() == ErrorCode::DegenerateGeometry;
}

std::string skip_note(const ManifestRow& r, const Error& e) {
  return "object " + std::to_string(r.object) + " view " + std::to_string(r.view) + ": " + e.what();
}

void check_convergence(const std::vector<SceneRun>& runs) {
  bool any = false, all_failed = true;
  for (const auto& r : runs)
    for (const auto& o : r.fits) {
      any = true;
      all_failed = all_failed && !o.fit.converged;
    }
  if (any && all_failed) throw Error(ErrorCode::NoConvergence, "no object fit converged");
}

std::string summary_csv(const std::vector<SceneRun>& runs) {
  std::string out = "scene,objects,attempts,successes,gsr,termination\n";
  for (const auto& r : runs)
    out += std::to_string(r.scene) + "," + std::to_string(r.fits.size()) + "," + std::to_string(r.plan.attempts) + "," +
           std::to_string(r.plan.successes) + "," + num(r.plan.gsr()) + "," + r.plan.termination + "\n";
  return out;
}

Json summary_json(const std::vector<SceneRun>& runs, const RunConfig& cfg) {
  Json scenes = Json::array();
  int attempts = 0, successes = 0;
  for (const auto& r : runs) {
    scenes.push_back({{"scene", r.scene},
                      {"objects", r.fits.size()},
                      {"attempts", r.plan.attempts},
                      {"successes", r.plan.successes},
                      {"gsr", r.plan.gsr()},
                      {"termination", r.plan.termination}});
    attempts += r.plan.attempts;
    successes += r.plan.successes;
  }
  return {{"format", 1},
          {"scenes", scenes},
          {"attempts", attempts},
          {"successes", successes},
          {"gsr", attempts > 0 ? double(successes) / attempts : 0.0},
          {"config", to_json(cfg)}};
}

void write_timing(const fs::path& path, const char* command, double seconds) {
  io::write_text_atomic(path, io::dump({{"command", command}, {"wall_time_s", seconds}}));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<SceneRun> grasp_into(const Dataset& d, const RunConfig& cfg, const fs::path& out) {
  std::vector<SceneRun> runs;
  for (int si : selected_scenes(d, cfg)) {
    const Scene scene = load_scene(d, si);
    std::vector<ObjectFit> fits;
    std::vector<std::string> skipped;
    for (const auto& row : choose_rows(d.manifest, si, cfg.view)) {
      try {
        fits.push_back({si, row.view, row.object, fit_prepared(prepare(d, row, cfg))});
      } catch (const Error& e) {
        if (!fit_failure(e)) throw Error(e.code(), "scene " + std::to_string(si) + " object " +
                                                       std::to_string(row.object) + ": " + e.what());
        skipped.push_back(skip_note(row, e));
      }
    }
    runs.push_back(plan_fits(scene, si, std::move(fits), std::move(skipped), cfg));
    write_scene_run(runs.back(), out, cfg);
  }
  io::write_text_atomic(out / "grasp_summary.json", io::dump(summary_json(runs, cfg)));
  io::write_text_atomic(out / "grasp_summary.csv", summary_csv(runs));
  return runs;
}

}  // namespace

std::uint64_t fit_seed(std::uint64_t master, int scene, int view, int object) {
  return derive_seed(master, "fit",
                     {static_cast<std::uint64_t>(scene), static_cast<std::uint64_t>(view), static_cast<std::uint64_t>(object)});
}

void RunConfig::validate() const {
  fit.validate();
  gripper.validate();
  bin.validate();
  if (jobs < 0) throw Error(ErrorCode::Usage, "jobs must be >= 0");
  if (sigma < 0) throw Error(ErrorCode::Usage, "sigma must be >= 0");
  if (dataset.n_scenes < 1) throw Error(ErrorCode::Usage, "scenes must be >= 1");
  if (dataset.n_objects < 1) throw Error(ErrorCode::Usage, "objects must be >= 1");
  if (plan.max_grasps < 1 || plan.max_retries < 0 || plan.closure_margin < 0) throw Error(ErrorCode::Usage, "bad plan limits");
  if (!(scene.eps_lo > 0 && scene.eps_lo <= scene.eps_hi && scene.scale_lo > 0 && scene.scale_lo <= scene.scale_hi))
    throw Error(ErrorCode::Usage, "bad scene ranges");
  if (!(dataset.noise_sigma >= 0)) throw Error(ErrorCode::Usage, "noise must be >= 0");
}

Json to_json(const RunConfig& c) {
  return {{"format", 1},
          {"seed", c.seed},
          {"out", c.out},
          {"jobs", c.jobs},
          {"sigma", c.sigma},
          {"view", c.view},
          {"scene_index", c.scene_index},
          {"dump_clouds", c.dump_clouds},
          {"fit", fit_json(c.fit)},
          {"gripper", gripper_json(c.gripper)},
          {"plan", {{"max_grasps", c.plan.max_grasps}, {"max_retries", c.plan.max_retries}, {"closure_margin", c.plan.closure_margin}}},
          {"bin", io::to_json(c.bin)},
          {"scene",
           {{"eps_lo", c.scene.eps_lo},
            {"eps_hi", c.scene.eps_hi},
            {"scale_lo", c.scene.scale_lo},
            {"scale_hi", c.scene.scale_hi},
            {"max_attempts", c.scene.max_attempts},
            {"penetration_tol", c.scene.penetration_tol},
            {"overlap_samples", c.scene.overlap_samples}}},
          {"dataset",
           {{"n_scenes", c.dataset.n_scenes},
            {"n_objects", c.dataset.n_objects},
            {"camera_height", c.dataset.camera_height},
            {"jitter_deg", c.dataset.jitter_deg},
            {"noise_sigma", c.dataset.noise_sigma},
            {"augment", c.dataset.augment},
            {"render",
             {{"min_samples", c.dataset.render.min_samples},
              {"samples_per_pixel", c.dataset.render.samples_per_pixel},
              {"depth_tol", c.dataset.render.depth_tol}}}}}};
}

RunConfig run_config_from_json(const Json& j, const RunConfig& base) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
  if (j.contains("format") && j.at("format") != 1) throw Error(ErrorCode::ParseError, "unsupported config format");
  RunConfig c = base;
  take(j, "seed", c.seed);
  take(j, "out", c.out);
  take(j, "jobs", c.jobs);
  take(j, "sigma", c.sigma);
  take(j, "view", c.view);
  take(j, "scene_index", c.scene_index);
  take(j, "dump_clouds", c.dump_clouds);
  read_fit(section(j, "fit"), c.fit);
  read_gripper(section(j, "gripper"), c.gripper);
  const Json& p = section(j, "plan");
  take(p, "max_grasps", c.plan.max_grasps);
  take(p, "max_retries", c.plan.max_retries);
  take(p, "closure_margin", c.plan.closure_margin);
  if (j.contains("bin")) c.bin = io::bin_from_json(section(j, "bin"));
  const Json& s = section(j, "scene");
  take(s, "eps_lo", c.scene.eps_lo);
  take(s, "eps_hi", c.scene.eps_hi);
  take(s, "scale_lo", c.scene.scale_lo);
  take(s, "scale_hi", c.scene.scale_hi);
  take(s, "max_attempts", c.scene.max_attempts);
  take(s, "penetration_tol", c.scene.penetration_tol);
  take(s, "overlap_samples", c.scene.overlap_samples);
  const Json& d = section(j, "dataset");
  take(d, "n_scenes", c.dataset.n_scenes);
  take(d, "n_objects", c.dataset.n_objects);
  take(d, "camera_height", c.dataset.camera_height);
  take(d, "jitter_deg", c.dataset.jitter_deg);
  take(d, "noise_sigma", c.dataset.noise_sigma);
  take(d, "augment", c.dataset.augment);
  const Json& r = section(d, "render");
  take(r, "min_samples", c.dataset.render.min_samples);
  take(r, "samples_per_pixel", c.dataset.render.samples_per_pixel);
  take(r, "depth_tol", c.dataset.render.depth_tol);
  return c;
}

void aggregate(EvalReport& report) {
  std::sort(report.rows.begin(), report.rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return std::tie(a.scene, a.view, a.object) < std::tie(b.scene, b.view, b.object);
  });
  std::map<int, SceneAggregate> plans;
  for (const auto& s : report.scenes) plans[s.scene] = s;
  report.scenes.clear();
  for (std::size_t i = 0; i < report.rows.size();) {
    SceneAggregate a;
    a.scene = report.rows[i].scene;
    std::size_t k = i;
    for (; k < report.rows.size() && report.rows[k].scene == a.scene; ++k) {
      a.mre_deg += report.rows[k].mre_deg;
      a.mte_mm += report.rows[k].mte_mm;
      a.mcd_mm2 += report.rows[k].mcd_mm2;
    }
    a.n_objects = static_cast<int>(k - i);
    a.mre_deg /= a.n_objects;
    a.mte_mm /= a.n_objects;
    a.mcd_mm2 /= a.n_objects;
    if (auto it = plans.find(a.scene); it != plans.end()) {
      a.attempts = it->second.attempts;
      a.successes = it->second.successes;
    }
    report.scenes.push_back(a);
    i = k;
  }
  report.mre_deg = report.mte_mm = report.mcd_mm2 = 0.0;
  report.attempts = report.successes = 0;
  for (const auto& s : report.scenes) {
    report.mre_deg += s.mre_deg;
    report.mte_mm += s.mte_mm;
    report.mcd_mm2 += s.mcd_mm2;
    report.attempts += s.attempts;
    report.successes += s.successes;
  }
  if (!report.scenes.empty()) {
    const double n = static_cast<double>(report.scenes.size());
    report.mre_deg /= n;
    report.mte_mm /= n;
    report.mcd_mm2 /= n;
  }
}

Json to_json(const EvalReport& r) {
  Json rows = Json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"scene", x.scene},
                    {"view", x.view},
                    {"object", x.object},
                    {"mre_deg", x.mre_deg},
                    {"mte_mm", x.mte_mm},
                    {"mcd_mm2", x.mcd_mm2},
                    {"occlusion_ratio", x.occlusion_ratio}});
  Json scenes = Json::array();
  for (const auto& s : r.scenes)
    scenes.push_back({{"scene", s.scene},
                      {"n_objects", s.n_objects},
                      {"mre_deg", s.mre_deg},
                      {"mte_mm", s.mte_mm},
                      {"mcd_mm2", s.mcd_mm2},
                      {"attempts", s.attempts},
                      {"successes", s.successes}});
  return {{"format", 1},
          {"rows", rows},
          {"scenes", scenes},
          {"mre_deg", r.mre_deg},
          {"mte_mm", r.mte_mm},
          {"mcd_mm2", r.mcd_mm2},
          {"attempts", r.attempts},
          {"successes", r.successes},
          {"gsr", r.gsr()},
          {"config", r.config}};
}

std::string eval_csv(const EvalReport& r) {
  std::string out = "scene,view,object,mre_deg,mte_mm,mcd_mm2,occlusion_ratio\n";
  for (const auto& x : r.rows)
    out += std::to_string(x.scene) + "," + std::to_string(x.view) + "," + std::to_string(x.object) + "," +
           num(x.mre_deg) + "," + num(x.mte_mm) + "," + num(x.mcd_mm2) + "," + num(x.occlusion_ratio) + "\n";
  return out;
}

Manifest cmd_generate(const RunConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Scene> scenes;
  for (int i = 0; i < cfg.dataset.n_scenes; ++i) {
    try {
      scenes.push_back(generate_scene(cfg.bin, cfg.dataset.n_objects,
                                      derive_seed(cfg.seed, "scene", {static_cast<std::uint64_t>(i)}), cfg.scene));
    } catch (const Error& e) {
      throw Error(e.code(), "scene " + std::to_string(i) + ": " + e.what());
    }
  }
  const fs::path out(cfg.out);
  Manifest m = export_dataset(scenes, out, cfg.dataset, cfg.seed);
  io::write_text_atomic(out / "run_config.json", io::dump(to_json(cfg)));
  write_timing(out / "generate_timing.json", "generate", seconds_since(t0));
  return m;
}

FitResult cmd_fit(const fs::path& cloud_path, const RunConfig& cfg, const std::optional<fs::path>& surface_ply) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const PointCloud raw = io::read_cloud(cloud_path);
  fs::path side_path = cloud_path;
  side_path.replace_extension(".json");
  Json side = Json::object();
  int scene = -1, view = -1, object = -1;
  if (fs::exists(side_path)) {
    side = io::read_json(side_path);
    scene = side.value("scene", -1);
    view = side.value("view", -1);
    object = side.value("object", -1);
  }
  FitConfig fc = config_for(cfg, side, raw, scene, view, object);
  if (scene < 0) fc.sample_seed = derive_seed(cfg.seed, "fit");
  const FitResult fit = fit_pipeline(raw, fc);

  const fs::path out(cfg.out);
  Json j = io::to_json(fit);
  j["config"] = to_json(cfg);
  j["input"] = cloud_path.filename().string();
  io::write_text_atomic(out / "fit.json", io::dump(j));
  std::string csv = "region,score\n";
  for (std::size_t k = 0; k < fit.regions.scores.size(); ++k)
    csv += std::to_string(k) + "," + num(fit.regions.scores[k]) + "\n";
  io::write_text_atomic(out / "fit_regions.csv", csv);
  if (surface_ply) io::write_cloud(*surface_ply, sample_surface(fit.sq, 2000, fit.sample_seed));
  write_timing(out / "fit_timing.json", "fit", seconds_since(t0));
  if (!fit.converged) throw Error(ErrorCode::NoConvergence, "fit did not converge from any start");
  return fit;
}

std::vector<SceneRun> cmd_grasp(const fs::path& dataset_dir, const RunConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset d = open_dataset(dataset_dir);
  const fs::path out(cfg.out);
  auto runs = grasp_into(d, cfg, out);
  io::write_text_atomic(out / "run_config.json", io::dump(to_json(cfg)));
  write_timing(out / "grasp_timing.json", "grasp", seconds_since(t0));
  check_convergence(runs);
  return runs;
}

EvalReport cmd_eval(const fs::path& pred_dir, const fs::path& gt_manifest, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset d = open_dataset(gt_manifest);
  std::map<std::tuple<int, int, int>, const ManifestRow*> gt;
  for (const auto& r : d.manifest.rows) gt[{r.scene, r.view, r.object}] = &r;

  if (!fs::is_directory(pred_dir)) throw Error(ErrorCode::IoFailure, "not a directory: " + pred_dir.string());
  static const std::regex fit_name(R"(scene_(\d+)/view_(\d+)/obj_(\d+)\.json)");
  static const std::regex plan_name(R"(scene_(\d+)/plan\.json)");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(pred_dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  EvalReport report;
  std::vector<std::string> unmatched;
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, pred_dir).generic_string();
    std::smatch m;
    if (std::regex_match(rel, m, fit_name)) {
      const int s = std::stoi(m[1]), v = std::stoi(m[2]), o = std::stoi(m[3]);
      auto it = gt.find({s, v, o});
      if (it == gt.end()) {
        unmatched.push_back("scene " + std::to_string(s) + " view " + std::to_string(v) + " object " +
                            std::to_string(o));
        continue;
      }
      const Json pj = io::read_json(f);
      if (!pj.contains("sq")) throw Error(ErrorCode::ParseError, f.string() + ": missing field 'sq'");
      const Superquadric pred = io::sq_from_json(pj.at("sq"));
      const Superquadric truth = io::sq_from_json(io::read_json(d.root / it->second->gt_path).at("sq"));
      const Metrics mt = eval_metrics(pred, truth);
      report.rows.push_back({s, v, o, mt.mre_deg, mt.mte_mm, mt.mcd_mm2, it->second->occlusion_ratio});
    } else if (std::regex_match(rel, m, plan_name)) {
      const Json pj = io::read_json(f);
      SceneAggregate a;
      a.scene = std::stoi(m[1]);
      if (!pj.contains("summary")) throw Error(ErrorCode::ParseError, f.string() + ": missing field 'summary'");
      a.attempts = pj.at("summary").value("attempts", 0);
      a.successes = pj.at("summary").value("successes", 0);
      report.scenes.push_back(a);
    }
  }
  if (!unmatched.empty()) {
    std::string msg = "predictions without ground truth:";
    for (const auto& u : unmatched) msg += " [" + u + "]";
    throw Error(ErrorCode::IdMismatch, msg);
  }
  if (report.rows.empty()) throw Error(ErrorCode::IdMismatch, "no predictions found under " + pred_dir.string());
  aggregate(report);
  report.config = to_json(cfg);

  const fs::path out(cfg.out);
  io::write_text_atomic(out / "eval.json", io::dump(to_json(report)));
  io::write_text_atomic(out / "eval.csv", eval_csv(report));
  write_timing(out / "eval_timing.json", "eval", seconds_since(t0));
  return report;
}

std::vector<AblationRow> cmd_ablate(const fs::path& dataset_dir, const RunConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out(cfg.out);
  fs::path data = dataset_dir;
  if (!fs::exists(data / "manifest.json") && !(fs::is_regular_file(data) && data.filename() == "manifest.json")) {
    RunConfig g = cfg;
    g.out = (out / "dataset").string();
    cmd_generate(g);
    data = g.out;
  }
  const Dataset d = open_dataset(data);

  struct Variant {
    const char* name;
    bool pre;
    bool post;
  };
  const Variant variants[] = {{"full", true, true}, {"wo_pre", false, true}, {"wo_pp", true, false}};
  std::vector<AblationRow> table;
  for (const auto& v : variants) {
    RunConfig vc = cfg;
    vc.fit.enable_pre = v.pre;
    vc.fit.enable_post = v.post;
    vc.out = (out / v.name).string();
    grasp_into(d, vc, vc.out);
    io::write_text_atomic(fs::path(vc.out) / "run_config.json", io::dump(to_json(vc)));
    const EvalReport r = cmd_eval(vc.out, d.root / "manifest.json", vc);
    table.push_back({v.name, r.mre_deg, r.mte_mm, r.mcd_mm2, r.gsr()});
  }

  Json rows = Json::array();
  std::string csv = "method,mre_deg,mte_mm,mcd_mm2,gsr\n";
  for (const auto& r : table) {
    rows.push_back({{"method", r.name}, {"mre_deg", r.mre_deg}, {"mte_mm", r.mte_mm}, {"mcd_mm2", r.mcd_mm2}, {"gsr", r.gsr}});
    csv += r.name + "," + num(r.mre_deg) + "," + num(r.mte_mm) + "," + num(r.mcd_mm2) + "," + num(r.gsr) + "\n";
  }
  io::write_text_atomic(out / "ablation.json", io::dump({{"format", 1}, {"rows", rows}, {"config", to_json(cfg)}}));
  io::write_text_atomic(out / "ablation.csv", csv);
  write_timing(out / "ablate_timing.json", "ablate", seconds_since(t0));
  return table;
}

}  // namespace sqgrasp
