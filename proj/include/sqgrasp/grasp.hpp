#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "sqgrasp/fitting.hpp"
#include "sqgrasp/geometry.hpp"
#include "sqgrasp/scene.hpp"

namespace sqgrasp {

/// Parallel-jaw gripper. Defaults only approximate a common 85 mm hand.
struct GripperSpec {
  double max_width = 0.085;
  double finger_length = 0.04;
  double finger_thickness = 0.02;
  double palm_depth = 0.05;
  double friction_mu = 0.5;
  double clearance = 0.004;   // added to the contact separation
  double tip_margin = 0.002;  // fingertip reach past the contact line
  double slide_step = 0.01;
  double sweep_step_deg = 30.0;
  double grid_step = 0.005;   // swept-volume sampling

  void validate() const;
};

/// Gripper frame: x closes the jaws, the gripper approaches along -z, the
/// origin sits midway between the fingertips' contact points.
struct GraspCandidate {
  Pose pose;
  Vec3 approach = -Vec3::UnitZ();  // world, gripper toward object
  double width = 0.0;
  std::array<Vec3, 2> contacts;
  std::array<Vec3, 2> normals;  // outward surface normals
  std::array<int, 2> regions{-1, -1};
  int family = 0;  // closing axis 0..2, 3 for the revolute sweep
  double priority = 0.0;
  int index = 0;  // position in the sampled list

  Vec3 center() const { return pose.translation; }
  Vec3 closing_axis() const { return pose.rotation.col(0); }
};

/// Candidates for one superquadric, each family sliding along the remaining
/// axes. Throws NoFeasibleGrasp when none fits in the jaws.
std::vector<GraspCandidate> sample_candidates(const Superquadric& sq, const GripperSpec& gripper);

/// Points sampling the fingers and palm swept back along the approach.
std::vector<Vec3> swept_volume(const GraspCandidate& cand, const GripperSpec& gripper);

/// True when the swept gripper stays clear of the bin and of every object
/// except skip_id.
bool collision_check(const GraspCandidate& cand, const Scene& scene, const GripperSpec& gripper, int skip_id = -1);
bool collision_check(const GraspCandidate& cand, const BinSpec& bin, const std::vector<Superquadric>& obstacles,
                     const GripperSpec& gripper);

/// The open gripper, swept along the approach, stays outside the grasped
/// object itself.
bool finger_clearance(const GraspCandidate& cand, const Superquadric& own, const GripperSpec& gripper);

/// Keeps candidates whose two contact regions both score above sigma.
std::vector<GraspCandidate> filter_by_quality(const std::vector<GraspCandidate>& cands, const FitResult& fit,
                                              double sigma);

/// Top-down first, then nearest to com, then input order. Throws
/// EmptyCandidates.
std::vector<GraspCandidate> prioritize(const std::vector<GraspCandidate>& cands, const Vec3& com);
double priority_key(const Vec3& approach);

/// Both contact-line directions inside the friction cones.
bool force_closure(const GraspCandidate& cand, double mu);

struct PlanStep {
  int object_id = 0;
  GraspCandidate cand;
  bool success = false;
};

struct GraspPlan {
  std::vector<PlanStep> steps;
  std::string termination = "cleared";  // cleared | max_grasps | exhausted
  int attempts = 0;
  int successes = 0;
  std::vector<int> unreachable;
  std::vector<int> remaining;

  double gsr() const { return attempts > 0 ? static_cast<double>(successes) / attempts : 0.0; }
};

struct PlanConfig {
  double sigma = 0.0;  // 0 selects default_sigma(fit.sample_n)
  int max_grasps = 20;
  int max_retries = 2;
  /// Pose error allowance of the fits (m): planned grasps must stay
  /// force-closure and clear of their own object with the grasp center moved
  /// this far along the approach and slide axes. 0 disables.
  double closure_margin = 0.003;
};

/// Force closure on sq at the candidate and at its center shifted by
/// +-margin along the approach and slide axes.
bool robust_closure(const Superquadric& sq, const GraspCandidate& cand, double mu, double margin);
/// finger_clearance under the same shifts.
bool robust_clearance(const GraspCandidate& cand, const Superquadric& own, const GripperSpec& gripper, double margin);

/// Where the jaws actually touch a superquadric when closing along the
/// candidate's axis; false if the closing line misses it.
bool contacts_on(const Superquadric& sq, const GraspCandidate& cand, GraspCandidate& out);

/// Sequential clearing: plans against the fits, executes against the
/// scene's ground truth.
GraspPlan plan_scene(const Scene& scene, const std::map<int, FitResult>& fits, const GripperSpec& gripper,
                     const PlanConfig& cfg = {});

}  // namespace sqgrasp
