#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/io.hpp"
#include "sqgrasp/pipeline.hpp"
#include "support.hpp"

using namespace sqgrasp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sqgrasp_pipe_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig small_run(const fs::path& out) {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.out = out.string();
  cfg.dataset.n_scenes = 1;
  cfg.dataset.n_objects = 2;
  cfg.scene.scale_hi = 0.035;
  cfg.view = 0;
  return cfg;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

// One sphere, exported like any generated scene.
fs::path sphere_dataset(const fs::path& dir) {
  Scene scene;
  Superquadric ball;
  ball.scale = {0.025, 0.025, 0.025};
  ball.pose.translation = Vec3(0.02, -0.01, 0.025);
  scene.objects.push_back({0, ball});
  DatasetConfig dc;
  export_dataset({scene}, dir, dc, 3);
  return dir;
}

}  // namespace

TEST_CASE("config echo round trip") {
  RunConfig cfg;
  cfg.seed = 123456789012345ULL;
  cfg.sigma = 1e-4;
  cfg.fit.sample_n = 1500;
  cfg.fit.view_dir = Vec3(0.1, 0.2, -0.97);
  cfg.gripper.max_width = 0.07;
  cfg.bin.inner_x = 0.4;
  cfg.dataset.n_objects = 3;
  cfg.scene.scale_hi = 0.04;
  const io::Json j = to_json(cfg);
  const RunConfig back = run_config_from_json(io::Json::parse(io::dump(j)));
  CHECK(io::dump(to_json(back)) == io::dump(j));
  CHECK(back.seed == cfg.seed);
  // Partial configs override only what they name.
  const RunConfig partial = run_config_from_json(io::Json{{"dataset", {{"n_scenes", 4}}}});
  CHECK(partial.dataset.n_scenes == 4);
  CHECK(partial.dataset.n_objects == RunConfig{}.dataset.n_objects);
  CHECK_THROWS_AS(run_config_from_json(io::Json{{"seed", "x"}}), Error);
}

TEST_CASE("aggregates equal recomputation and ignore row order") {
  Rng rng(71);
  EvalReport r;
  for (int s = 0; s < 4; ++s)
    for (int o = 0; o < 5; ++o)
      r.rows.push_back({s, 0, o, rng.uniform(0, 90), rng.uniform(0, 10), rng.uniform(0, 50), rng.uniform()});
  EvalReport shuffled = r;
  for (std::size_t i = shuffled.rows.size() - 1; i > 0; --i) std::swap(shuffled.rows[i], shuffled.rows[rng.below(i + 1)]);
  aggregate(r);
  aggregate(shuffled);
  CHECK(io::dump(to_json(r)) == io::dump(to_json(shuffled)));
  double total = 0;
  for (const auto& s : r.scenes) {
    double sum = 0;
    int n = 0;
    for (const auto& row : r.rows)
      if (row.scene == s.scene) {
        sum += row.mcd_mm2;
        ++n;
      }
    CHECK(std::abs(s.mcd_mm2 - sum / n) <= 1e-12);
    total += sum / n;
  }
  CHECK(std::abs(r.mcd_mm2 - total / r.scenes.size()) <= 1e-12);
}

TEST_CASE("generate is reproducible byte for byte") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  auto ca = small_run(a);
  auto cb = small_run(b);
  cb.out = a.string();  // the echo stores the out path; keep it equal
  const Manifest ma = cmd_generate(ca);
  fs::rename(a, b);
  cmd_generate(cb);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  CHECK(slurp(a / "run_config.json") == slurp(b / "run_config.json"));
  for (const auto& row : ma.rows) CHECK(slurp(a / row.cloud_path) == slurp(b / row.cloud_path));
  RunConfig bad = small_run(scratch("gen_bad"));
  bad.dataset.n_objects = 0;
  CHECK_THROWS_AS(cmd_generate(bad), Error);
}

TEST_CASE("fit on an exported ground-truth surface") {
  const fs::path dir = scratch("fit");
  fs::create_directories(dir);
  Rng rng(72);
  const auto gt = testing::random_sq(rng);
  io::write_cloud(dir / "gt.ply", sample_surface(gt, 3000, 5));
  RunConfig cfg;
  cfg.out = (dir / "out").string();
  cfg.fit.partial_view = false;
  cfg.fit.enable_pre = false;
  const FitResult fit = cmd_fit(dir / "gt.ply", cfg, dir / "surface.ply");
  CHECK(eval_metrics(fit.sq, gt).mcd_mm2 < 1.0);
  CHECK(fs::exists(dir / "out" / "fit.json"));
  CHECK(fs::exists(dir / "out" / "fit_regions.csv"));
  CHECK(io::read_cloud(dir / "surface.ply").size() == 2000);
  const auto j = io::read_json(dir / "out" / "fit.json");
  CHECK(j["format"] == 1);
  CHECK(io::sq_from_json(j["sq"]).shape.eps1 == fit.sq.shape.eps1);

  // Post-processing can only lower the reported chamfer.
  const FitResult moved_in = [&] {
    Superquadric off = gt;
    off.pose.translation += Vec3(0.01, 0, 0);
    io::write_cloud(dir / "off.ply", sample_surface(off, 3000, 6));
    return cmd_fit(dir / "off.ply", cfg);
  }();
  RunConfig no_pp = cfg;
  no_pp.fit.enable_post = false;
  CHECK(moved_in.chamfer <= cmd_fit(dir / "off.ply", no_pp).chamfer);

  std::ofstream(dir / "bad.ply") << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                                    "property float z\nend_header\n1 2\n";
  try {
    cmd_fit(dir / "bad.ply", cfg);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("bad.ply:8") != std::string::npos);
  }
}

TEST_CASE("single sphere: grasp succeeds, eval of truth is zero, mismatches are reported") {
  const fs::path data = sphere_dataset(scratch("sphere_data"));
  RunConfig cfg;
  cfg.out = scratch("sphere_out").string();
  const auto runs = cmd_grasp(data, cfg);
  REQUIRE(runs.size() == 1);
  CHECK(runs[0].plan.gsr() == 1.0);
  CHECK(fs::exists(fs::path(cfg.out) / "scene_0000" / "plan.json"));
  CHECK(fs::exists(fs::path(cfg.out) / "scene_0000" / "priorities.csv"));
  CHECK(fs::exists(fs::path(cfg.out) / "grasp_summary.csv"));
  // Same seed, same plan.
  RunConfig again = cfg;
  again.out = scratch("sphere_out2").string();
  cmd_grasp(data, again);
  CHECK(slurp(fs::path(cfg.out) / "scene_0000" / "plan.json") == slurp(fs::path(again.out) / "scene_0000" / "plan.json"));

  // Ground truth as prediction.
  const fs::path pred = scratch("sphere_pred");
  const Manifest m = io::manifest_from_json(io::read_json(data / "manifest.json"));
  for (const auto& row : m.rows) {
    fs::create_directories((pred / row.gt_path).parent_path());
    fs::copy_file(data / row.gt_path, pred / row.gt_path);
  }
  RunConfig ec;
  ec.out = scratch("sphere_eval").string();
  const EvalReport r = cmd_eval(pred, data / "manifest.json", ec);
  CHECK(r.rows.size() == m.rows.size());
  for (const auto& row : r.rows) {
    CHECK(row.mre_deg < 1e-6);
    CHECK(row.mte_mm < 1e-9);
    CHECK(row.mcd_mm2 < 0.5);
  }
  CHECK(fs::exists(fs::path(ec.out) / "eval.csv"));
  CHECK(fs::exists(fs::path(ec.out) / "eval_timing.json"));

  fs::create_directories(pred / "scene_0000" / "view_0");
  fs::copy_file(data / m.rows[0].gt_path, pred / "scene_0000" / "view_0" / "obj_9.json");
  try {
    cmd_eval(pred, data / "manifest.json", ec);
    FAIL("expected IdMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IdMismatch);
    CHECK(std::string(e.what()).find("object 9") != std::string::npos);
  }
}

TEST_CASE("ablation: three rows matching independent runs") {
  const fs::path out = scratch("ablate");
  RunConfig cfg = small_run(out);
  const auto rows = cmd_ablate(out / "missing", cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "full");
  CHECK(rows[1].name == "wo_pre");
  CHECK(rows[2].name == "wo_pp");
  CHECK(fs::exists(out / "ablation.csv"));

  RunConfig solo = cfg;
  solo.fit.enable_post = false;
  solo.out = scratch("ablate_solo").string();
  cmd_grasp(out / "dataset", solo);
  const EvalReport r = cmd_eval(solo.out, out / "dataset" / "manifest.json", solo);
  CHECK(r.mcd_mm2 == rows[2].mcd_mm2);
  CHECK(r.gsr() == rows[2].gsr);

  // Full pipeline never worse than without post-processing, object by object.
  const auto full = io::read_json(out / "full" / "eval.json");
  const auto wopp = io::read_json(out / "wo_pp" / "eval.json");
  REQUIRE(full["rows"].size() == wopp["rows"].size());
  for (std::size_t i = 0; i < full["rows"].size(); ++i)
    CHECK(full["rows"][i]["mcd_mm2"].get<double>() <= wopp["rows"][i]["mcd_mm2"].get<double>());
}

TEST_CASE("command line: exit codes") {
  const std::string cli = SQGRASP_CLI;
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  auto run = [&](const std::string& args) {
    const int rc = std::system((cli + " " + args + " > " + (dir / "log.txt").string() + " 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("generate --objects 0 --out " + (dir / "g").string()) == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("fit " + (dir / "nothing.ply").string() + " --out " + dir.string()) == 3);
  std::ofstream(dir / "bad.ply") << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n";
  CHECK(run("fit " + (dir / "bad.ply").string() + " --out " + dir.string()) == 3);
  CHECK(slurp(dir / "log.txt").find("bad.ply:") != std::string::npos);
}
