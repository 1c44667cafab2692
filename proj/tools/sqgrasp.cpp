#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/pipeline.hpp"

namespace {

using namespace sqgrasp;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Usage: return 2;
    case ErrorCode::IoFailure:
    case ErrorCode::ParseError:
    case ErrorCode::IdMismatch: return 3;
    default: return 4;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sqgrasp");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("SQGRASP_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Superquadric fitting and grasp planning for bin picking"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string config_path, out;
  std::optional<int> jobs;
  std::optional<double> sigma;
  bool no_pre = false, no_post = false;
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output directory");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::NonNegativeNumber);
  app.add_flag("--no-preprocess", no_pre, "Skip outlier removal and downsampling");
  app.add_flag("--no-postprocess", no_post, "Skip ICP refinement");
  app.add_option("--sigma", sigma, "Region quality threshold (0 for the default)");

  auto* gen = app.add_subcommand("generate", "Render a synthetic bin-picking dataset")->fallthrough();
  std::optional<int> n_scenes, n_objects;
  gen->add_option("--scenes", n_scenes, "Number of scenes");
  gen->add_option("--objects", n_objects, "Objects per scene");

  auto* fit = app.add_subcommand("fit", "Fit a superquadric to one point cloud")->fallthrough();
  std::string cloud_path, surface_path;
  bool full_view = false;
  fit->add_option("cloud", cloud_path, "PLY or XYZ point cloud")->required();
  fit->add_option("--surface", surface_path, "Also write the fitted surface as PLY");
  fit->add_flag("--full-view", full_view, "Cloud covers the whole object");

  auto* grasp = app.add_subcommand("grasp", "Fit every object and plan bin clearing")->fallthrough();
  std::string dataset_dir;
  std::optional<int> view, scene;
  bool dump_clouds = false;
  grasp->add_option("dataset", dataset_dir, "Dataset directory (with manifest.json)")->required();
  grasp->add_option("--view", view, "View to use (default: least occluded per object)");
  grasp->add_option("--scene", scene, "Only this scene index");
  grasp->add_flag("--dump-clouds", dump_clouds, "Write fitted surfaces as PLY");

  auto* eval = app.add_subcommand("eval", "Score fits against ground truth")->fallthrough();
  std::string pred_dir, gt_manifest;
  eval->add_option("pred", pred_dir, "Directory of fits as written by grasp")->required();
  eval->add_option("manifest", gt_manifest, "Ground-truth manifest.json")->required();

  auto* ablate = app.add_subcommand("ablate", "Full pipeline against the w/o Pre and w/o PP variants")->fallthrough();
  std::string ablate_data;
  ablate->add_option("--dataset", ablate_data, "Existing dataset (generated when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = run_config_from_json(io::read_json(config_path));
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (jobs) cfg.jobs = *jobs;
    if (sigma) cfg.sigma = *sigma;
    if (no_pre) cfg.fit.enable_pre = false;
    if (no_post) cfg.fit.enable_post = false;
    if (n_scenes) cfg.dataset.n_scenes = *n_scenes;
    if (n_objects) cfg.dataset.n_objects = *n_objects;
    if (full_view) cfg.fit.partial_view = false;
    if (view) cfg.view = *view;
    if (scene) cfg.scene_index = *scene;
    if (dump_clouds) cfg.dump_clouds = true;
    if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
    spdlog::debug("config: {}", to_json(cfg).dump());

    if (*gen) {
      const Manifest m = cmd_generate(cfg);
      std::cout << "generated " << m.scene_paths.size() << " scenes, " << m.rows.size() << " object clouds in "
                << cfg.out << "\n";
    } else if (*fit) {
      std::optional<std::filesystem::path> surface;
      if (!surface_path.empty()) surface = surface_path;
      const FitResult r = cmd_fit(cloud_path, cfg, surface);
      std::cout << "eps " << r.sq.shape.eps1 << " " << r.sq.shape.eps2 << "  scale " << r.sq.scale.ax << " "
                << r.sq.scale.ay << " " << r.sq.scale.az << "  chamfer " << r.chamfer * 1e6 << " mm^2\n";
    } else if (*grasp) {
      const auto runs = cmd_grasp(dataset_dir, cfg);
      int attempts = 0, successes = 0;
      for (const auto& r : runs) {
        for (const auto& s : r.skipped) spdlog::warn("scene {}: skipped {}", r.scene, s);
        spdlog::info("scene {}: {}/{} grasps, {}", r.scene, r.plan.successes, r.plan.attempts, r.plan.termination);
        attempts += r.plan.attempts;
        successes += r.plan.successes;
      }
      std::cout << "GSR " << (attempts ? double(successes) / attempts : 0.0) << " (" << successes << "/" << attempts
                << ")\n";
    } else if (*eval) {
      const EvalReport r = cmd_eval(pred_dir, gt_manifest, cfg);
      std::cout << "objects " << r.rows.size() << "  mRE " << r.mre_deg << " deg  mTE " << r.mte_mm << " mm  mCD "
                << r.mcd_mm2 << " mm^2";
      if (r.attempts) std::cout << "  GSR " << r.gsr();
      std::cout << "\n";
    } else if (*ablate) {
      std::cout << "method  mRE(deg)  mTE(mm)  mCD(mm^2)  GSR\n";
      for (const auto& r : cmd_ablate(ablate_data, cfg))
        std::cout << r.name << "  " << r.mre_deg << "  " << r.mte_mm << "  " << r.mcd_mm2 << "  " << r.gsr << "\n";
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("json: {}", e.what());
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
