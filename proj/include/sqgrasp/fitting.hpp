#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sqgrasp/cloud.hpp"
#include "sqgrasp/cloud_ops.hpp"
#include "sqgrasp/geometry.hpp"

namespace sqgrasp {

struct FitConfig {
  int max_iter = 200;
  double param_tol = 1e-8;
  int n_starts = 6;
  double eps_min = kEpsMin;
  double eps_max = kEpsMax;
  double scale_min = 0.005;
  double scale_max = 0.5;
  bool enable_pre = true;
  bool enable_post = true;
  std::size_t sample_n = 2000;

  /// Direction the camera looks along. Starts are shifted along it by half
  /// the smallest PCA extent when partial_view is set.
  Vec3 view_dir = -Vec3::UnitZ();
  bool partial_view = true;

  /// Seed of the surface draws used for model selection and scoring.
  std::uint64_t sample_seed = 0x5a3c0ffeeULL;
  double region_cell_area = 4e-4;  // m^2
  OutlierConfig outliers;
  IcpConfig icp;
  /// Relative drop in cloud-to-surface error an ICP move must achieve.
  double post_min_gain = 0.01;

  /// Throws Usage on unordered bounds or zero counts.
  void validate() const;
};

struct RegionPartition {
  std::vector<Vec3> seeds;
  std::vector<double> scores;  // mean point score per region
  std::vector<int> assignment;  // region of each target sample
};

struct FitResult {
  Superquadric sq;
  double chamfer = 0.0;  // m^2, against the cloud the fit was scored on
  std::vector<double> residual_history;
  PointCloud targets;               // surface samples T of sq
  std::vector<double> point_scores;  // C_i per target, sums to 1
  RegionPartition regions;
  std::size_t n_regions = 0;
  std::uint64_t sample_seed = 0;
  std::size_t sample_n = 0;
  bool converged = true;
  bool post_applied = false;   // ICP refinement accepted
  bool post_degenerate = false;  // ICP refinement hit DegenerateGeometry
  int best_start = 0;
  int iterations = 0;
};

/// First-order signed distance to the surface, positive outside: (H - 1) /
/// |grad H| with H = G^(eps1/2), which scales linearly along rays from the
/// center. Exact for spheres.
double surface_residual(const Superquadric& sq, const Vec3& p_world);

std::vector<Superquadric> initialize_candidates(const PointCloud& cloud, const FitConfig& cfg);

struct LmResult {
  Superquadric sq;
  std::vector<double> cost_history;  // sum of squared residuals per accepted step
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt over all 11 parameters from a single start.
LmResult optimize_from(const PointCloud& cloud, const Superquadric& init, const FitConfig& cfg);

/// Multi-start fit; applies refine_icp when cfg.enable_post.
/// Restarts from basins adjacent to a converged fit (45-degree twist, polar axis swaps).
std::vector<Superquadric> hop_candidates(const Superquadric& sq, const FitConfig& cfg);
FitResult fit_superquadric(const PointCloud& cloud, const FitConfig& cfg);

/// Chamfer and quality/region scores of a given primitive against a cloud.
FitResult score_fit(const Superquadric& sq, const PointCloud& cloud, const FitConfig& cfg);

/// Rigid ICP refinement of a fit; keeps the original when it does not lower
/// the Chamfer distance.
FitResult refine_icp(const FitResult& fit, const PointCloud& cloud, const FitConfig& cfg);

/// Per-target-sample scores exp(-d_i) / Z, d_i in units of the mean scale.
std::vector<double> quality_scores(const Superquadric& fit_sq, const PointCloud& cloud, std::size_t sample_n,
                                   std::uint64_t seed = FitConfig{}.sample_seed);
std::vector<double> quality_scores_for(const Superquadric& fit_sq, const PointCloud& targets,
                                       const PointCloud& cloud);

/// Number of regions for a primitive: ceil(area / cell_area).
std::size_t region_count(const Superquadric& sq, double cell_area = 4e-4);

RegionPartition region_scores(const Superquadric& fit_sq, const PointCloud& targets,
                              const std::vector<double>& point_scores, double cell_area = 4e-4);

/// Default region threshold: 90% of the perfect-fit score.
inline double default_sigma(std::size_t n_targets) { return 0.9 / static_cast<double>(n_targets); }

/// Outlier removal then FPS to sample_n.
PointCloud preprocess(const PointCloud& cloud, const FitConfig& cfg);

/// preprocess (if enabled) + fit_superquadric.
FitResult fit_pipeline(const PointCloud& cloud, const FitConfig& cfg);

struct Metrics {
  double mre_deg = 0.0;
  double mte_mm = 0.0;
  double mcd_mm2 = 0.0;
};

/// Rotation error modulo the symmetry group of gt, translation error, and
/// Chamfer between 2000-point surface samples, in degrees / mm / mm^2.
Metrics eval_metrics(const Superquadric& pred, const Superquadric& gt, std::uint64_t seed = 0xe7a1);

/// The reparametrization of pred (exact equivalent form and symmetry flip of
/// gt's frame) that is closest in rotation to gt.
Superquadric align_to(const Superquadric& pred, const Superquadric& gt);

}  // namespace sqgrasp
