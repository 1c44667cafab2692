#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqgrasp/fitting.hpp"
#include "sqgrasp/grasp.hpp"
#include "sqgrasp/io.hpp"
#include "sqgrasp/scene.hpp"

namespace sqgrasp {

/// Everything a command needs. The JSON echo written next to every report
/// reproduces the run when passed back through --config.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  int jobs = 0;  // 0 keeps the OpenMP default
  FitConfig fit;
  GripperSpec gripper;
  double sigma = 0.0;  // 0 selects the per-fit default
  PlanConfig plan;
  BinSpec bin;
  SceneConfig scene;
  DatasetConfig dataset;
  /// View used per object by grasp/ablate; -1 takes each object's least
  /// occluded view.
  int view = -1;
  /// Restrict grasp to one scene index; -1 runs all scenes in the manifest.
  int scene_index = -1;
  bool dump_clouds = false;

  void validate() const;
};

io::Json to_json(const RunConfig& cfg);
/// Fields present in j override those of base.
RunConfig run_config_from_json(const io::Json& j, const RunConfig& base = {});

struct EvalRow {
  int scene = 0;
  int view = 0;
  int object = 0;
  double mre_deg = 0.0;
  double mte_mm = 0.0;
  double mcd_mm2 = 0.0;
  double occlusion_ratio = 0.0;
};

struct SceneAggregate {
  int scene = 0;
  int n_objects = 0;
  double mre_deg = 0.0;
  double mte_mm = 0.0;
  double mcd_mm2 = 0.0;
  int attempts = 0;  // zero when no plan was found for the scene
  int successes = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by (scene, view, object)
  std::vector<SceneAggregate> scenes;
  /// Means over scene aggregates.
  double mre_deg = 0.0;
  double mte_mm = 0.0;
  double mcd_mm2 = 0.0;
  int attempts = 0;
  int successes = 0;
  double gsr() const { return attempts > 0 ? static_cast<double>(successes) / attempts : 0.0; }
  io::Json config;
};

/// Scene-level means recomputed from the rows; plan counts are kept.
void aggregate(EvalReport& report);
io::Json to_json(const EvalReport& report);
std::string eval_csv(const EvalReport& report);

struct ObjectFit {
  int scene = 0;
  int view = 0;
  int object = 0;
  FitResult fit;
};

struct SceneRun {
  int scene = 0;
  std::vector<ObjectFit> fits;
  GraspPlan plan;
  std::vector<std::string> skipped;  // objects whose cloud could not be fitted, with the reason
};

/// Renders cfg.dataset.n_scenes scenes into cfg.out. PlacementFailure
/// carries the scene index.
Manifest cmd_generate(const RunConfig& cfg);

/// Fits one cloud file. A sidecar <stem>.json from the dataset supplies
/// the camera position and the ids the fit seed is derived from.
FitResult cmd_fit(const std::filesystem::path& cloud_path, const RunConfig& cfg,
                  const std::optional<std::filesystem::path>& surface_ply = std::nullopt);

/// Fits every object of the selected scenes and plans each one. Writes
/// scene_XXXX/plan.json, fits under scene_XXXX/view_j/ and CSVs into cfg.out.
std::vector<SceneRun> cmd_grasp(const std::filesystem::path& dataset_dir, const RunConfig& cfg);

/// Matches the fits found under pred_dir against the manifest's ground
/// truth. IdMismatch lists predictions without a ground-truth row.
EvalReport cmd_eval(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_manifest,
                    const RunConfig& cfg);

struct AblationRow {
  std::string name;  // full | wo_pre | wo_pp
  double mre_deg = 0.0;
  double mte_mm = 0.0;
  double mcd_mm2 = 0.0;
  double gsr = 0.0;
};

/// Full pipeline, without pre-processing, without post-processing, over the
/// same scenes and seeds. Generates the dataset into cfg.out/dataset when
/// dataset_dir has no manifest.
std::vector<AblationRow> cmd_ablate(const std::filesystem::path& dataset_dir, const RunConfig& cfg);

/// Seed of the fit for one dataset object.
std::uint64_t fit_seed(std::uint64_t master, int scene, int view, int object);

}  // namespace sqgrasp
