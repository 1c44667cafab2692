#include "sqgrasp/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "sqgrasp/errors.hpp"

namespace sqgrasp {

void GripperSpec::validate() const {
  if (!(max_width > 0 && finger_length > 0 && finger_thickness > 0 && palm_depth > 0 && friction_mu > 0))
    throw Error(ErrorCode::Usage, "gripper dimensions must be positive");
  if (!(max_width > finger_thickness)) throw Error(ErrorCode::Usage, "max_width must exceed finger thickness");
  if (!(slide_step > 0 && sweep_step_deg > 0 && grid_step > 0 && clearance >= 0 && tip_margin >= 0))
    throw Error(ErrorCode::Usage, "gripper sampling steps must be positive");
}

namespace {

// Surface point hit by the ray from the center along d (local frame).
Vec3 radial_surface_point(const Superquadric& sq, const Vec3& d) {
  const double g = inside_outside_local(sq, d);
  return d * std::pow(g, -0.5 * sq.shape.eps1);
}

std::vector<double> slide_offsets(double extent, double step) {
  std::vector<double> out{0.0};
  for (int m = 1; m * step < extent; ++m) {
    out.push_back(m * step);
    out.push_back(-m * step);
  }
  return out;
}

void emit(const Superquadric& sq, const Vec3& dir_local, const Vec3& approach_local, int family,
          const GripperSpec& gripper, std::vector<GraspCandidate>& out) {
  const Vec3 p = radial_surface_point(sq, dir_local);
  const double width = 2.0 * p.norm() + gripper.clearance;
  if (width > gripper.max_width) return;
  const Mat3& r = sq.pose.rotation;
  const Vec3 x = (r * p).normalized();
  Vec3 a = r * approach_local;
  a -= a.dot(x) * x;
  if (a.norm() < 1e-9) return;
  a.normalize();
  const Vec3 c = sq.center();
  for (double sign : {1.0, -1.0}) {
    GraspCandidate g;
    const Vec3 z = sign * a;
    g.pose.rotation.col(0) = x;
    g.pose.rotation.col(1) = z.cross(x);
    g.pose.rotation.col(2) = z;
    g.pose.translation = c;
    g.approach = -z;
    g.width = width;
    g.contacts = {c + r * p, c - r * p};
    g.normals[0] = normal_at(sq, g.contacts[0]);
    g.normals[1] = normal_at(sq, g.contacts[1]);
    g.family = family;
    g.priority = priority_key(g.approach);
    g.index = static_cast<int>(out.size());
    out.push_back(g);
  }
}

void add_box(const Pose& pose, const Vec3& lo, const Vec3& hi, double step, std::vector<Vec3>& out) {
  int n[3];
  for (int k = 0; k < 3; ++k) n[k] = std::max(1, static_cast<int>(std::ceil((hi[k] - lo[k]) / step))) + 1;
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int k = 0; k < n[2]; ++k) {
        const Vec3 t(double(i) / (n[0] - 1), double(j) / (n[1] - 1), double(k) / (n[2] - 1));
        out.push_back(pose.apply(lo + t.cwiseProduct(hi - lo)));
      }
}

std::vector<Vec3> swept(const GraspCandidate& cand, const GripperSpec& gripper, bool palm) {
  const double hw = 0.5 * cand.width;
  const double t = gripper.finger_thickness;
  const double bottom = -gripper.tip_margin;
  const double knuckle = gripper.finger_length - gripper.tip_margin;
  const double sweep = gripper.palm_depth;
  std::vector<Vec3> pts;
  add_box(cand.pose, Vec3(hw, -0.5 * t, bottom), Vec3(hw + t, 0.5 * t, knuckle + sweep), gripper.grid_step, pts);
  add_box(cand.pose, Vec3(-hw - t, -0.5 * t, bottom), Vec3(-hw, 0.5 * t, knuckle + sweep), gripper.grid_step, pts);
  if (palm)
    add_box(cand.pose, Vec3(-hw - t, -0.5 * t, knuckle), Vec3(hw + t, 0.5 * t, knuckle + gripper.palm_depth + sweep),
            gripper.grid_step, pts);
  return pts;
}

bool hits(const std::vector<Vec3>& pts, const Superquadric& sq) {
  const Vec3 c = sq.center();
  const double reach = Vec3(sq.scale.ax, sq.scale.ay, sq.scale.az).norm();
  for (const auto& p : pts)
    if ((p - c).norm() <= reach && implicit_value(sq, p) < 0) return true;
  return false;
}

bool hits_bin(const std::vector<Vec3>& pts, const BinSpec& bin) {
  const auto solids = bin.solids();
  for (const auto& p : pts) {
    const Vec3 q = bin.pose.inverse_apply(p);
    if (q.z() < 0) return true;
    for (std::size_t s = 1; s < solids.size(); ++s) {
      const auto& [lo, hi] = solids[s];
      if ((q.array() >= lo.array()).all() && (q.array() <= hi.array()).all()) return true;
    }
  }
  return false;
}

int nearest_region(const RegionPartition& regions, const Vec3& p) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < regions.seeds.size(); ++k) {
    const double d = squared_distance(regions.seeds[k], p);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace

double priority_key(const Vec3& approach) { return -approach.z(); }

std::vector<GraspCandidate> sample_candidates(const Superquadric& sq, const GripperSpec& gripper) {
  gripper.validate();
  std::vector<GraspCandidate> out;
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    const int k = (i + 2) % 3;
    for (auto [slide, approach] : {std::pair{j, k}, std::pair{k, j}}) {
      for (double s : slide_offsets(sq.scale[slide], gripper.slide_step)) {
        Vec3 dir = Vec3::Zero();
        dir[i] = sq.scale[i];
        dir[slide] = s;
        emit(sq, dir, Vec3::Unit(approach), i, gripper, out);
      }
    }
  }
  const bool revolute = std::abs(sq.shape.eps2 - 1.0) <= 0.1 &&
                        std::abs(sq.scale.ax - sq.scale.ay) <= 0.05 * std::max(sq.scale.ax, sq.scale.ay);
  if (revolute) {
    // Half a turn covers every closing line.
    for (double phi = gripper.sweep_step_deg; phi < 180.0 - 1e-9; phi += gripper.sweep_step_deg) {
      const double rad = phi * std::numbers::pi / 180.0;
      emit(sq, Vec3(std::cos(rad) * sq.scale.ax, std::sin(rad) * sq.scale.ay, 0.0), Vec3::UnitZ(), 3, gripper, out);
    }
  }
  if (out.empty()) throw Error(ErrorCode::NoFeasibleGrasp, "no closing axis fits within max_width");
  return out;
}

std::vector<Vec3> swept_volume(const GraspCandidate& cand, const GripperSpec& gripper) {
  return swept(cand, gripper, true);
}

bool collision_check(const GraspCandidate& cand, const BinSpec& bin, const std::vector<Superquadric>& obstacles,
                     const GripperSpec& gripper) {
  const auto pts = swept_volume(cand, gripper);
  if (hits_bin(pts, bin)) return false;
  for (const auto& sq : obstacles)
    if (hits(pts, sq)) return false;
  return true;
}

bool collision_check(const GraspCandidate& cand, const Scene& scene, const GripperSpec& gripper, int skip_id) {
  std::vector<Superquadric> obstacles;
  for (const auto& o : scene.objects)
    if (o.id != skip_id) obstacles.push_back(o.sq);
  return collision_check(cand, scene.bin, obstacles, gripper);
}

bool finger_clearance(const GraspCandidate& cand, const Superquadric& own, const GripperSpec& gripper) {
  return !hits(swept(cand, gripper, true), own);
}

std::vector<GraspCandidate> filter_by_quality(const std::vector<GraspCandidate>& cands, const FitResult& fit,
                                              double sigma) {
  std::vector<GraspCandidate> out;
  for (auto c : cands) {
    for (int s = 0; s < 2; ++s) c.regions[s] = nearest_region(fit.regions, c.contacts[s]);
    bool keep = true;
    if (sigma > 0)
      for (int r : c.regions) keep = keep && r >= 0 && fit.regions.scores[r] > sigma;
    if (keep) out.push_back(c);
  }
  return out;
}

std::vector<GraspCandidate> prioritize(const std::vector<GraspCandidate>& cands, const Vec3& com) {
  if (cands.empty()) throw Error(ErrorCode::EmptyCandidates, "prioritize on an empty candidate list");
  std::vector<GraspCandidate> out = cands;
  std::sort(out.begin(), out.end(), [](const GraspCandidate& a, const GraspCandidate& b) {
    if (a.priority != b.priority) return a.priority > b.priority;
    return a.index < b.index;
  });
  // Keys within 1e-9 of a group's head count as tied.
  for (std::size_t head = 0; head < out.size();) {
    std::size_t end = head + 1;
    while (end < out.size() && out[head].priority - out[end].priority <= 1e-9) ++end;
    std::sort(out.begin() + head, out.begin() + end, [&](const GraspCandidate& a, const GraspCandidate& b) {
      const double da = (a.center() - com).norm();
      const double db = (b.center() - com).norm();
      if (da != db) return da < db;
      return a.index < b.index;
    });
    head = end;
  }
  return out;
}

bool force_closure(const GraspCandidate& cand, double mu) {
  const Vec3 line = cand.contacts[1] - cand.contacts[0];
  if (line.norm() < 1e-12) return false;
  const Vec3 l = line.normalized();
  const double cone = std::atan(mu);
  auto angle = [](const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); };
  return angle(l, -cand.normals[0]) <= cone && angle(-l, -cand.normals[1]) <= cone;
}

bool contacts_on(const Superquadric& sq, const GraspCandidate& cand, GraspCandidate& out) {
  const Vec3 o = sq.to_local(cand.center());
  const Vec3 d = sq.pose.rotation.transpose() * cand.closing_axis();
  auto f = [&](double t) { return inside_outside_local(sq, o + t * d) - 1.0; };
  const double reach = 2.0 * Vec3(sq.scale.ax, sq.scale.ay, sq.scale.az).norm() + o.norm();
  constexpr int kSteps = 800;
  const double h = 2.0 * reach / kSteps;
  // Outermost crossing from each side, then bisection.
  auto crossing = [&](double from, double dir, double& t_out) {
    double prev = from;
    for (int s = 1; s <= kSteps; ++s) {
      const double t = from + dir * s * h;
      if (f(t) < 0) {
        double lo = prev, hi = t;  // f(lo) >= 0, f(hi) < 0
        for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-14; ++it) {
          const double mid = 0.5 * (lo + hi);
          (f(mid) < 0 ? hi : lo) = mid;
        }
        t_out = lo;
        return true;
      }
      prev = t;
    }
    return false;
  };
  double tp, tm;
  if (!crossing(reach, -1.0, tp) || !crossing(-reach, 1.0, tm)) return false;
  out = cand;
  out.contacts = {cand.center() + tp * cand.closing_axis(), cand.center() + tm * cand.closing_axis()};
  out.normals = {normal_at(sq, out.contacts[0]), normal_at(sq, out.contacts[1])};
  return true;
}

bool robust_closure(const Superquadric& sq, const GraspCandidate& cand, double mu, double margin) {
  if (!force_closure(cand, mu)) return false;
  if (margin <= 0) return true;
  for (int axis : {1, 2})
    for (double s : {-margin, margin}) {
      GraspCandidate moved = cand, on;
      moved.pose.translation += s * cand.pose.rotation.col(axis);
      if (!contacts_on(sq, moved, on) || !force_closure(on, mu)) return false;
    }
  return true;
}

bool robust_clearance(const GraspCandidate& cand, const Superquadric& own, const GripperSpec& gripper, double margin) {
  if (!finger_clearance(cand, own, gripper)) return false;
  if (margin <= 0) return true;
  for (int axis : {1, 2})
    for (double s : {-margin, margin}) {
      GraspCandidate moved = cand;
      moved.pose.translation += s * cand.pose.rotation.col(axis);
      if (!finger_clearance(moved, own, gripper)) return false;
    }
  return true;
}

GraspPlan plan_scene(const Scene& scene, const std::map<int, FitResult>& fits, const GripperSpec& gripper,
                     const PlanConfig& cfg) {
  gripper.validate();
  GraspPlan plan;
  std::set<int> removed, given_up, unreachable;
  std::map<int, int> failures;
  std::map<int, std::set<int>> tried;

  for (const auto& o : scene.objects) {
    auto it = fits.find(o.id);
    if (it == fits.end()) continue;
    try {
      sample_candidates(it->second.sq, gripper);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoFeasibleGrasp) throw;
      unreachable.insert(o.id);
    }
  }

  while (true) {
    if (plan.attempts >= cfg.max_grasps) {
      plan.termination = "max_grasps";
      break;
    }
    struct Pick {
      int id = -1;
      GraspCandidate cand;
      double com_dist = 0.0;
    };
    Pick best;
    bool any_active = false;
    for (const auto& o : scene.objects) {
      auto it = fits.find(o.id);
      if (it == fits.end() || removed.count(o.id) || given_up.count(o.id) || unreachable.count(o.id)) continue;
      any_active = true;
      const FitResult& fit = it->second;
      const double sigma = cfg.sigma > 0 ? cfg.sigma : default_sigma(fit.sample_n ? fit.sample_n : 1);

      // The planner only knows the fits of what is still in the bin.
      std::vector<Superquadric> obstacles;
      for (const auto& other : scene.objects) {
        if (other.id == o.id || removed.count(other.id)) continue;
        auto f = fits.find(other.id);
        if (f != fits.end()) obstacles.push_back(f->second.sq);
      }
      std::vector<GraspCandidate> pool;
      for (const auto& c : filter_by_quality(sample_candidates(fit.sq, gripper), fit, sigma))
        if (!tried[o.id].count(c.index)) pool.push_back(c);
      if (pool.empty()) continue;
      for (const auto& c : prioritize(pool, fit.sq.center())) {
        if (!robust_closure(fit.sq, c, gripper.friction_mu, cfg.closure_margin) ||
            !robust_clearance(c, fit.sq, gripper, cfg.closure_margin) ||
            !collision_check(c, scene.bin, obstacles, gripper))
          continue;
        const double dist = (c.center() - fit.sq.center()).norm();
        const bool better = best.id < 0 || c.priority > best.cand.priority + 1e-9 ||
                            (std::abs(c.priority - best.cand.priority) <= 1e-9 && dist < best.com_dist);
        if (better) best = {o.id, c, dist};
        break;
      }
    }
    if (!any_active) {
      plan.termination = given_up.empty() ? "cleared" : "exhausted";
      break;
    }
    if (best.id < 0) {
      plan.termination = "exhausted";
      break;
    }

    // Execution against ground truth.
    const SceneObject* truth = scene.find(best.id);
    std::vector<Superquadric> gt_obstacles;
    for (const auto& other : scene.objects)
      if (other.id != best.id && !removed.count(other.id)) gt_obstacles.push_back(other.sq);
    GraspCandidate real;
    bool success = contacts_on(truth->sq, best.cand, real) &&
                   (real.contacts[0] - real.contacts[1]).norm() <= best.cand.width &&
                   force_closure(real, gripper.friction_mu) && finger_clearance(best.cand, truth->sq, gripper) &&
                   collision_check(best.cand, scene.bin, gt_obstacles, gripper);

    plan.steps.push_back({best.id, best.cand, success});
    ++plan.attempts;
    if (success) {
      ++plan.successes;
      removed.insert(best.id);
    } else {
      tried[best.id].insert(best.cand.index);
      if (++failures[best.id] > cfg.max_retries) given_up.insert(best.id);
    }
  }

  plan.unreachable.assign(unreachable.begin(), unreachable.end());
  for (const auto& o : scene.objects)
    if (!removed.count(o.id)) plan.remaining.push_back(o.id);
  return plan;
}

}  // namespace sqgrasp
