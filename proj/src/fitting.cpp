#include "sqgrasp/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/neighbor_index.hpp"
#include "sqgrasp/rng.hpp"

namespace sqgrasp {

void FitConfig::validate() const {
  if (max_iter < 1 || n_starts < 1 || sample_n < 1) throw Error(ErrorCode::Usage, "fit counts must be >= 1");
  if (!(eps_min > 0 && eps_min <= eps_max)) throw Error(ErrorCode::Usage, "eps bounds out of order");
  if (!(scale_min > 0 && scale_min <= scale_max)) throw Error(ErrorCode::Usage, "scale bounds out of order");
  if (!(region_cell_area > 0)) throw Error(ErrorCode::Usage, "region cell area must be positive");
  if (!(post_min_gain >= 0 && post_min_gain < 1)) throw Error(ErrorCode::Usage, "post_min_gain must be in [0, 1)");
}

namespace {

constexpr int kParams = 11;
constexpr std::size_t kSelectionOversample = 10;
using ParamVec = Eigen::Matrix<double, kParams, 1>;
using ParamMat = Eigen::Matrix<double, kParams, kParams>;

// Per-point quantities that depend only on the pose.
struct LocalPoint {
  double log_x, log_y, log_z;
  double norm;
};

std::vector<LocalPoint> local_points(const std::vector<Vec3>& pts, const Mat3& rotation, const Vec3& t) {
  std::vector<LocalPoint> out(pts.size());
  const Mat3 rt = rotation.transpose();
  const auto n = static_cast<std::ptrdiff_t>(pts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vec3 q = rt * (pts[i] - t);
    out[i] = {std::log(std::abs(q.x())), std::log(std::abs(q.y())), std::log(std::abs(q.z())), q.norm()};
  }
  return out;
}

// Signed distance to the tangent plane at the radial projection of the
// point, from cached logs. With H = G^(e1/2), homogeneous of degree one,
// that distance is (H - 1) / |grad H| and the gradient direction is the same
// at the point and at its projection. Far less biased than the plain radial
// distance on oblique, noisy patches.
inline double surface_residual_local(const LocalPoint& lp, double e1, double e2, double lax, double lay, double laz,
                                double min_scale) {
  if (lp.norm < 1e-15) return -min_scale;
  const double a = 2.0 / e2;
  const double lx = lp.log_x - lax;
  const double ly = lp.log_y - lay;
  const double lz = lp.log_z - laz;
  const double ls = std::log(std::exp(a * lx) + std::exp(a * ly));
  const double lxy = (e2 / e1) * ls;
  const double lzz = (2.0 / e1) * lz;
  const double lg = std::max(lxy, lzz) + std::log1p(std::exp(-std::abs(lxy - lzz)));
  const double h = std::exp(0.5 * e1 * lg);
  // grad H = G^(e1/2 - 1) * (S^(e2/e1 - 1) X^(a-1)/ax, same for y, Z^(2/e1 - 1)/az)
  const double lc = (0.5 * e1 - 1.0) * lg;
  const double lsx = (e2 / e1 - 1.0) * ls;
  const double gx = std::exp(lc + lsx + (a - 1.0) * lx - lax);
  const double gy = std::exp(lc + lsx + (a - 1.0) * ly - lay);
  const double gz = std::exp(lc + (2.0 / e1 - 1.0) * lz - laz);
  const double gn = std::sqrt(gx * gx + gy * gy + gz * gz);
  if (!(gn > 0) || !std::isfinite(gn)) return lp.norm * (1.0 - 1.0 / h);
  return (h - 1.0) / gn;
}

struct State {
  Mat3 base_rotation;
  ParamVec x;  // e1 e2 ax ay az tx ty tz w1 w2 w3 (w relative to base_rotation)

  Superquadric to_sq() const {
    Superquadric sq;
    sq.shape = {x[0], x[1]};
    sq.scale = {x[2], x[3], x[4]};
    sq.pose.rotation = base_rotation * rotation_exp(x.segment<3>(8));
    sq.pose.translation = x.segment<3>(5);
    return sq;
  }
};

void residuals(const std::vector<LocalPoint>& lps, const ParamVec& x, Eigen::VectorXd& out) {
  const double lax = std::log(x[2]);
  const double lay = std::log(x[3]);
  const double laz = std::log(x[4]);
  const double min_scale = std::min({x[2], x[3], x[4]});
  const auto n = static_cast<std::ptrdiff_t>(lps.size());
  out.resize(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = surface_residual_local(lps[i], x[0], x[1], lax, lay, laz, min_scale);
}

void residuals_full(const PointCloud& cloud, const State& s, Eigen::VectorXd& out) {
  const Mat3 r = s.base_rotation * rotation_exp(s.x.segment<3>(8));
  residuals(local_points(cloud.points, r, s.x.segment<3>(5)), s.x, out);
}

// Camera-facing model samples must lie near observed data: a one-sided
// hinge on their nearest-point distance. Without it a partial cloud leaves
// the unseen half unconstrained and fits drift into free space.
struct FreeSpace {
  std::optional<NeighborIndex> index;
  double tau = 0.0;
  double weight = 0.0;
  Vec3 toward = Vec3::UnitZ();
  std::vector<std::pair<double, double>> grid;

  std::size_t size() const { return index ? grid.size() : 0; }
};

constexpr int kFreeRows = 16;
constexpr int kFreeCols = 32;
// Model points farther than kFreeTol cloud spacings from any point are
// penalized, fully once the normal is kRamp (cosine) toward the camera.
constexpr double kFreeTol = 2.0;
constexpr double kRamp = 0.25;

double spacing_estimate(const PointCloud& cloud) {
  // Even points against odd points, median distance.
  PointCloud even, odd;
  for (std::size_t i = 0; i < cloud.size(); ++i) (i % 2 ? odd : even).push_back(cloud.points[i]);
  const NeighborIndex idx(even);
  std::vector<double> d;
  d.reserve(odd.size());
  for (const auto& p : odd.points) d.push_back(std::sqrt(idx.nearest(p).sq_dist));
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

FreeSpace make_free_space(const PointCloud& cloud, const FitConfig& cfg) {
  FreeSpace fs;
  if (!cfg.partial_view || cloud.size() < 4) return fs;
  fs.index.emplace(cloud);
  fs.tau = kFreeTol * spacing_estimate(cloud);
  fs.toward = -cfg.view_dir.normalized();
  for (int i = 0; i < kFreeRows; ++i)
    for (int j = 0; j < kFreeCols; ++j)
      fs.grid.emplace_back(-M_PI / 2 + M_PI * (i + 0.5) / kFreeRows, -M_PI + 2 * M_PI * (j + 0.5) / kFreeCols);
  fs.weight = std::sqrt(static_cast<double>(cloud.size()) / static_cast<double>(fs.grid.size()));
  return fs;
}

void model_residuals(const FreeSpace& fs, const Superquadric& sq, double* out) {
  const auto m = static_cast<std::ptrdiff_t>(fs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const auto [alpha, beta] = fs.grid[i];
    const Vec3 pl = surface_point_local(sq, eta_from_grid(alpha, sq.shape.eps1), omega_from_grid(beta, sq.shape.eps2));
    const Vec3 g = implicit_gradient_local(sq, pl);
    const double gn = g.norm();
    double w = 0.0;
    if (gn > 0 && std::isfinite(gn)) w = std::clamp((sq.pose.rotation * g).dot(fs.toward) / gn / kRamp, 0.0, 1.0);
    double r = 0.0;
    if (w > 0) {
      const double d = std::sqrt(fs.index->nearest(sq.pose.apply(pl)).sq_dist);
      r = fs.weight * w * std::max(0.0, d - fs.tau);
    }
    out[i] = r;
  }
}

void evaluate(const PointCloud& cloud, const FreeSpace& fs, const State& s, Eigen::VectorXd& out) {
  Eigen::VectorXd data;
  residuals_full(cloud, s, data);
  out.resize(data.size() + static_cast<Eigen::Index>(fs.size()));
  out.head(data.size()) = data;
  if (fs.size()) model_residuals(fs, s.to_sq(), out.data() + data.size());
}

ParamVec project(ParamVec x, const FitConfig& cfg) {
  x[0] = std::clamp(x[0], cfg.eps_min, cfg.eps_max);
  x[1] = std::clamp(x[1], cfg.eps_min, cfg.eps_max);
  for (int k = 2; k < 5; ++k) x[k] = std::clamp(x[k], cfg.scale_min, cfg.scale_max);
  return x;
}

ParamVec fd_steps(const ParamVec& x) {
  ParamVec h;
  h[0] = h[1] = 1e-6;
  for (int k = 2; k < 5; ++k) h[k] = 1e-6 * std::max(x[k], 1e-3);
  for (int k = 5; k < 8; ++k) h[k] = 1e-7;
  for (int k = 8; k < 11; ++k) h[k] = 1e-6;
  return h;
}

Eigen::MatrixXd jacobian(const PointCloud& cloud, const FreeSpace& fs, const State& s) {
  const auto n = static_cast<Eigen::Index>(cloud.size());
  const auto m = static_cast<Eigen::Index>(fs.size());
  Eigen::MatrixXd j(n + m, kParams);
  const ParamVec h = fd_steps(s.x);
  const auto base_lps = local_points(cloud.points, s.base_rotation * rotation_exp(s.x.segment<3>(8)),
                                     s.x.segment<3>(5));
  Eigen::VectorXd plus, minus;
  for (int k = 0; k < kParams; ++k) {
    State sp = s;
    State sm = s;
    sp.x[k] += h[k];
    sm.x[k] -= h[k];
    if (k < 5) {
      // Shape and scale leave the local coordinates untouched.
      Eigen::VectorXd dp, dm;
      residuals(base_lps, sp.x, dp);
      residuals(base_lps, sm.x, dm);
      plus.resize(n + m);
      minus.resize(n + m);
      plus.head(n) = dp;
      minus.head(n) = dm;
      if (m) {
        model_residuals(fs, sp.to_sq(), plus.data() + n);
        model_residuals(fs, sm.to_sq(), minus.data() + n);
      }
    } else {
      evaluate(cloud, fs, sp, plus);
      evaluate(cloud, fs, sm, minus);
    }
    j.col(k) = (plus - minus) / (2.0 * h[k]);
  }
  return j;
}

}  // namespace

double surface_residual(const Superquadric& sq, const Vec3& p_world) {
  const Vec3 q = sq.to_local(p_world);
  const LocalPoint lp{std::log(std::abs(q.x())), std::log(std::abs(q.y())), std::log(std::abs(q.z())), q.norm()};
  return surface_residual_local(lp, sq.shape.eps1, sq.shape.eps2, std::log(sq.scale.ax), std::log(sq.scale.ay),
                           std::log(sq.scale.az), sq.scale.min());
}

std::vector<Superquadric> initialize_candidates(const PointCloud& cloud, const FitConfig& cfg) {
  if (cloud.size() < 50) throw Error(ErrorCode::DegenerateCloud, "fitting needs at least 50 points");
  const PcaFrame frame = pca_frame(cloud);

  // Surface-uniform samples of a sphere have per-axis std r / sqrt(3).
  const Vec3 semi = (std::sqrt(3.0) / 2.0) * frame.extents;
  Vec3 center = frame.pose.translation;
  if (cfg.partial_view) center += 0.5 * frame.extents.minCoeff() * cfg.view_dir.normalized();

  static const ShapeParams kShapeSeeds[] = {{1.0, 1.0}, {0.3, 0.3}, {1.5, 1.5}, {0.3, 1.0}, {1.0, 0.3}};
  constexpr int kSeeds = sizeof(kShapeSeeds) / sizeof(kShapeSeeds[0]);

  std::vector<Superquadric> out;
  out.reserve(cfg.n_starts);
  for (int i = 0; i < cfg.n_starts; ++i) {
    // First 3 x 2 starts: cyclic axis permutations x {ellipsoid, box}; extra
    // starts cycle through further shape seeds.
    const int perm = i < 6 ? i / 2 : (i - 6) % 3;
    const int shape = i < 6 ? i % 2 : 2 + ((i - 6) / 3) % (kSeeds - 2);
    Superquadric sq;
    sq.shape = kShapeSeeds[shape];
    for (int k = 0; k < 3; ++k) {
      const int src = (k + perm) % 3;
      sq.pose.rotation.col(k) = frame.pose.rotation.col(src);
      sq.scale[k] = std::clamp(semi[src], cfg.scale_min, cfg.scale_max);
    }
    sq.pose.translation = center;
    out.push_back(sq);
  }
  return out;
}

LmResult optimize_from(const PointCloud& cloud, const Superquadric& init, const FitConfig& cfg) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "fit on empty cloud");
  State s;
  s.base_rotation = init.pose.rotation;
  s.x << init.shape.eps1, init.shape.eps2, init.scale.ax, init.scale.ay, init.scale.az, init.pose.translation,
      0.0, 0.0, 0.0;
  s.x = project(s.x, cfg);

  const FreeSpace fs = make_free_space(cloud, cfg);
  LmResult out;
  Eigen::VectorXd r;
  evaluate(cloud, fs, s, r);
  double cost = r.squaredNorm();
  out.cost_history.push_back(cost);
  const double tiny = 1e-30 * static_cast<double>(cloud.size());
  double lambda = 1e-3;

  for (int iter = 1; iter <= cfg.max_iter && !out.converged; ++iter) {
    if (cost <= tiny) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd j = jacobian(cloud, fs, s);
    const ParamMat a = j.transpose() * j;
    const ParamVec g = j.transpose() * r;
    out.iterations = iter;

    bool accepted = false;
    while (lambda < 1e12) {
      ParamMat h = a;
      for (int k = 0; k < kParams; ++k) h(k, k) += lambda * std::max(a(k, k), 1e-18);
      const ParamVec delta = -h.ldlt().solve(g);
      State trial = s;
      trial.x = project(s.x + delta, cfg);
      Eigen::VectorXd rt;
      evaluate(cloud, fs, trial, rt);
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct < cost) {
        const double rel = (cost - ct) / cost;
        // Fold the rotation increment into the base so w restarts at zero.
        trial.base_rotation = trial.base_rotation * rotation_exp(trial.x.segment<3>(8));
        trial.x.segment<3>(8).setZero();
        s = trial;
        r = std::move(rt);
        cost = ct;
        out.cost_history.push_back(cost);
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (rel < cfg.param_tol) out.converged = true;
        break;
      }
      lambda *= 4.0;
    }
    // No descent direction left: a stationary point.
    if (!accepted) out.converged = true;
  }
  out.sq = s.to_sq();
  return out;
}

std::vector<double> quality_scores_for(const Superquadric& fit_sq, const PointCloud& targets,
                                       const PointCloud& cloud) {
  if (cloud.empty() || targets.empty()) throw Error(ErrorCode::EmptyCloud, "quality scores need points");
  const NeighborIndex index(cloud);
  const auto hits = index.nearest_all(targets.points);
  const double unit = fit_sq.scale.mean();
  std::vector<double> scores(targets.size());
  double z = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    scores[i] = std::exp(-std::sqrt(hits[i].sq_dist) / unit);
    z += scores[i];
  }
  for (double& c : scores) c /= z;
  return scores;
}

std::vector<double> quality_scores(const Superquadric& fit_sq, const PointCloud& cloud, std::size_t sample_n,
                                   std::uint64_t seed) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "quality scores on empty cloud");
  return quality_scores_for(fit_sq, sample_surface(fit_sq, sample_n, seed), cloud);
}

std::size_t region_count(const Superquadric& sq, double cell_area) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(surface_area(sq) / cell_area)));
}

RegionPartition region_scores(const Superquadric& fit_sq, const PointCloud& targets,
                              const std::vector<double>& point_scores, double cell_area) {
  RegionPartition part;
  const std::size_t n = std::min(region_count(fit_sq, cell_area), targets.size());
  const auto seed_idx = fps_indices(targets, n);
  for (std::size_t i : seed_idx) part.seeds.push_back(targets.points[i]);
  const NeighborIndex seeds(part.seeds);
  const auto hits = seeds.nearest_all(targets.points);
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  part.assignment.resize(targets.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    part.assignment[i] = static_cast<int>(hits[i].index);
    sum[hits[i].index] += point_scores[i];
    ++count[hits[i].index];
  }
  part.scores.resize(n);
  for (std::size_t k = 0; k < n; ++k) part.scores[k] = count[k] ? sum[k] / static_cast<double>(count[k]) : 0.0;
  return part;
}

FitResult score_fit(const Superquadric& sq, const PointCloud& cloud, const FitConfig& cfg) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "score_fit on empty cloud");
  FitResult fit;
  fit.sq = sq;
  fit.sample_seed = cfg.sample_seed;
  fit.sample_n = cfg.sample_n;
  fit.targets = sample_surface(sq, cfg.sample_n, cfg.sample_seed);
  fit.chamfer = chamfer_distance(fit.targets, cloud);
  fit.point_scores = quality_scores_for(sq, fit.targets, cloud);
  fit.regions = region_scores(sq, fit.targets, fit.point_scores, cfg.region_cell_area);
  fit.n_regions = fit.regions.seeds.size();
  return fit;
}

namespace {

double objective(const PointCloud& cloud, const Superquadric& sq, const FitConfig& cfg) {
  State s;
  s.base_rotation = sq.pose.rotation;
  s.x << sq.shape.eps1, sq.shape.eps2, sq.scale.ax, sq.scale.ay, sq.scale.az, sq.pose.translation, 0.0, 0.0, 0.0;
  Eigen::VectorXd r;
  evaluate(cloud, make_free_space(cloud, cfg), s, r);
  return r.squaredNorm();
}

}  // namespace

FitResult refine_icp(const FitResult& fit, const PointCloud& cloud, const FitConfig& cfg) {
  // Correspondences run from every cloud point to a dense draw of the fitted
  // surface; a partial cloud has a true match for each of its points, while
  // the hidden half of the surface has none.
  const PointCloud dense = sample_surface(fit.sq, 4 * cfg.sample_n, derive_seed(cfg.sample_seed, "icp"));
  IcpResult icp;
  try {
    icp = icp_align(cloud, dense, cfg.icp);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateGeometry) throw;
    FitResult out = fit;
    out.post_degenerate = true;
    return out;
  }
  Superquadric moved = fit.sq;
  moved.pose = icp.transform.inverse().compose(fit.sq.pose);
  // Judge the move on an independent draw: the ICP target itself is biased
  // toward whatever pose ICP chose.
  const PointCloud judge = sample_surface(fit.sq, kSelectionOversample * cfg.sample_n,
                                          derive_seed(cfg.sample_seed, "icp-judge"));
  const double before = mean_nearest_sq(cloud, NeighborIndex(judge));
  const double after = mean_nearest_sq(cloud, NeighborIndex(transform_cloud(judge, icp.transform.inverse())));
  // A converged fit leaves ICP only sampling noise to chase.
  if (!(after < (1.0 - cfg.post_min_gain) * before)) return fit;
  // Nearest-sample distance and the fit's own residual disagree by noise;
  // a move must improve both.
  if (!(objective(cloud, moved, cfg) < objective(cloud, fit.sq, cfg))) return fit;
  FitResult candidate = score_fit(moved, cloud, cfg);
  if (candidate.chamfer <= fit.chamfer) {
    candidate.residual_history = fit.residual_history;
    candidate.converged = fit.converged;
    candidate.best_start = fit.best_start;
    candidate.iterations = fit.iterations;
    candidate.post_applied = true;
    return candidate;
  }
  return fit;
}

namespace {

// Chamfer against a dense draw. For partial views only the camera-facing
// half of the model is compared, the rest was never observable.
double selection_score(const Superquadric& sq, const PointCloud& cloud, const FitConfig& cfg, std::uint64_t seed) {
  PointCloud model = sample_surface(sq, kSelectionOversample * cfg.sample_n, seed);
  if (cfg.partial_view) {
    const Vec3 toward = -cfg.view_dir.normalized();
    PointCloud facing;
    for (const auto& p : model.points)
      if (normal_at(sq, p).dot(toward) > 0) facing.push_back(p);
    if (!facing.empty()) model = std::move(facing);
  }
  return chamfer_distance(model, cloud);
}

}  // namespace

std::vector<Superquadric> hop_candidates(const Superquadric& sq, const FitConfig& cfg) {
  // Nearby basins the local search cannot cross: a squircle cross section
  // twisted by 45 degrees looks like one with e2 -> 2 - e2, and swapping the
  // polar axis with x or y trades the roles of e1 and e2.
  std::vector<Superquadric> out;
  Superquadric twist = sq;
  twist.shape.eps2 = 2.0 - sq.shape.eps2;
  twist.pose.rotation = sq.pose.rotation * Eigen::AngleAxisd(M_PI / 4, Vec3::UnitZ()).toRotationMatrix();
  const double rxy = 0.5 * (sq.scale.ax + sq.scale.ay);
  twist.scale.ax = twist.scale.ay = rxy;
  out.push_back(twist);
  for (int axis = 0; axis < 2; ++axis) {
    Superquadric perm = sq;
    perm.shape = {sq.shape.eps2, sq.shape.eps1};
    perm.pose.rotation = sq.pose.rotation * Eigen::AngleAxisd(M_PI / 2, Vec3::Unit(axis)).toRotationMatrix();
    if (axis == 0) std::swap(perm.scale.ay, perm.scale.az);
    else std::swap(perm.scale.ax, perm.scale.az);
    out.push_back(perm);
  }
  for (auto& c : out) {
    c.shape.eps1 = std::clamp(c.shape.eps1, cfg.eps_min, cfg.eps_max);
    c.shape.eps2 = std::clamp(c.shape.eps2, cfg.eps_min, cfg.eps_max);
    for (int k = 0; k < 3; ++k) c.scale[k] = std::clamp(c.scale[k], cfg.scale_min, cfg.scale_max);
  }
  return out;
}

FitResult fit_superquadric(const PointCloud& cloud, const FitConfig& cfg) {
  cfg.validate();
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "fit on empty cloud");
  const auto starts = initialize_candidates(cloud, cfg);
  std::vector<LmResult> runs(starts.size());
  auto run_all = [&](const std::vector<Superquadric>& inits, std::size_t offset) {
    const auto n = static_cast<std::ptrdiff_t>(inits.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < n; ++k) runs[offset + k] = optimize_from(cloud, inits[k], cfg);
  };
  run_all(starts, 0);

  // Lowest Chamfer on a dense surface draw wins, lowest start index on ties.
  // The dense draw keeps sampling noise well below the differences between
  // competing local minima.
  const std::uint64_t selection_seed = derive_seed(cfg.sample_seed, "select");
  std::vector<double> cds;
  auto score_from = [&](std::size_t first) {
    for (std::size_t k = first; k < runs.size(); ++k)
      cds.push_back(selection_score(runs[k].sq, cloud, cfg, selection_seed));
  };
  auto argmin = [&] {
    return static_cast<std::size_t>(std::min_element(cds.begin(), cds.end()) - cds.begin());
  };
  score_from(0);
  std::size_t best = argmin();

  const auto hops = hop_candidates(runs[best].sq, cfg);
  const std::size_t first_hop = runs.size();
  runs.resize(first_hop + hops.size());
  run_all(hops, first_hop);
  score_from(first_hop);
  best = argmin();

  FitResult fit = score_fit(runs[best].sq, cloud, cfg);
  fit.residual_history = runs[best].cost_history;
  fit.best_start = static_cast<int>(best);
  fit.iterations = runs[best].iterations;
  fit.converged = std::any_of(runs.begin(), runs.end(), [](const LmResult& r) { return r.converged; });
  if (cfg.enable_post) fit = refine_icp(fit, cloud, cfg);
  return fit;
}

PointCloud preprocess(const PointCloud& cloud, const FitConfig& cfg) {
  return fps_downsample(remove_outliers(cloud, cfg.outliers), cfg.sample_n);
}

FitResult fit_pipeline(const PointCloud& cloud, const FitConfig& cfg) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "fit on empty cloud");
  if (cfg.enable_pre) return fit_superquadric(preprocess(cloud, cfg), cfg);
  return fit_superquadric(cloud, cfg);
}

}  // namespace sqgrasp
