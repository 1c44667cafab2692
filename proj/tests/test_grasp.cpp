#include <doctest.h>

#include <numbers>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/grasp.hpp"
#include "support.hpp"

using namespace sqgrasp;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

FitResult perfect_fit(const Superquadric& sq) {
  FitConfig cfg;
  cfg.partial_view = false;
  return score_fit(sq, sample_surface(sq, 4000, 3), cfg);
}

Superquadric resting(double ax, double ay, double az, Vec3 xy = Vec3::Zero(), double yaw = 0.0) {
  Superquadric sq;
  sq.shape = {0.6, 0.8};
  sq.scale = {ax, ay, az};
  sq.pose.rotation = axis_angle(Vec3::UnitZ(), yaw);
  sq.pose.translation = Vec3(xy.x(), xy.y(), az);
  return sq;
}

}  // namespace

TEST_CASE("sampled candidates are valid antipodal grasps") {
  Rng rng(51);
  const GripperSpec g;
  int checked = 0, fc = 0;
  for (int t = 0; t < 40; ++t) {
    const auto sq = testing::random_sq(rng, 0.2, 1.8, 0.01, 0.04);
    std::vector<GraspCandidate> cands;
    try {
      cands = sample_candidates(sq, g);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoFeasibleGrasp);
      continue;
    }
    for (const auto& c : cands) {
      ++checked;
      CHECK(c.width <= g.max_width);
      CHECK(c.pose.is_valid());
      CHECK(std::abs(implicit_value(sq, c.contacts[0])) < 1e-6);
      CHECK(std::abs(implicit_value(sq, c.contacts[1])) < 1e-6);
      CHECK(c.normals[0].dot(-c.normals[1]) >= std::cos(10 * kDeg));
      const Vec3 line = (c.contacts[0] - c.contacts[1]).normalized();
      CHECK(std::abs(line.dot(c.closing_axis())) == doctest::Approx(1.0));
      CHECK(std::abs(c.approach.dot(c.closing_axis())) < 1e-9);
      CHECK((c.approach + c.pose.rotation.col(2)).norm() < 1e-12);
      CHECK(c.width == doctest::Approx((c.contacts[0] - c.contacts[1]).norm() + g.clearance));
      CHECK(c.priority == priority_key(c.approach));
      fc += force_closure(c, g.friction_mu);
    }
  }
  CHECK(checked > 500);
  // Sliding off the axis tilts the closing line away from the normals.
  CHECK(fc > checked / 2);
  CHECK(fc < checked);
}

TEST_CASE("oversized objects have no grasp") {
  Superquadric big;
  big.scale = {0.1, 0.1, 0.1};
  CHECK_THROWS_AS(sample_candidates(big, GripperSpec{}), Error);
}

TEST_CASE("revolute shapes get the extra sweep") {
  Superquadric cyl;
  cyl.shape = {0.3, 1.0};
  cyl.scale = {0.025, 0.025, 0.05};
  const auto cands = sample_candidates(cyl, GripperSpec{});
  int sweep = 0;
  for (const auto& c : cands) sweep += c.family == 3;
  CHECK(sweep == 2 * 5);
  Superquadric box = cyl;
  box.shape.eps2 = 0.3;
  for (const auto& c : sample_candidates(box, GripperSpec{})) CHECK(c.family != 3);
}

TEST_CASE("prioritize: head is the argmax, ties by distance then index") {
  Rng rng(52);
  for (int t = 0; t < 100; ++t) {
    const auto sq = testing::random_sq(rng, 0.2, 1.8, 0.01, 0.035);
    std::vector<GraspCandidate> cands;
    try {
      cands = sample_candidates(sq, GripperSpec{});
    } catch (const Error&) {
      continue;
    }
    const Vec3 com = sq.center() + Vec3(rng.uniform(-0.01, 0.01), 0, 0);
    const auto order = prioritize(cands, com);
    REQUIRE(order.size() == cands.size());
    // Brute force scan for the lexicographic best.
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
      const auto& a = cands[i];
      const auto& b = cands[best];
      const double da = (a.center() - com).norm(), db = (b.center() - com).norm();
      if (a.priority > b.priority + 1e-9) best = i;
      else if (std::abs(a.priority - b.priority) <= 1e-9 && (da < db || (da == db && a.index < b.index))) best = i;
    }
    CHECK(order.front().priority == doctest::Approx(cands[best].priority).epsilon(1e-9));
    for (std::size_t i = 1; i < order.size(); ++i) CHECK(order[i].priority <= order[i - 1].priority + 1e-9);
  }
  CHECK_THROWS_AS(prioritize({}, Vec3::Zero()), Error);
}

TEST_CASE("force closure against the cone oracle") {
  GraspCandidate c;
  c.contacts = {Vec3(0.02, 0, 0), Vec3(-0.02, 0, 0)};
  const double mu = 0.5;
  for (double tilt_deg : {0.0, 10.0, 25.0, 26.0, 40.0}) {
    const double t = tilt_deg * kDeg;
    c.normals = {Vec3(std::cos(t), std::sin(t), 0), Vec3(-1, 0, 0)};
    CHECK(force_closure(c, mu) == (t <= std::atan(mu)));
  }
  c.contacts[1] = c.contacts[0];
  CHECK_FALSE(force_closure(c, mu));
}

TEST_CASE("contacts_on reproduces the sampled contacts on the same shape") {
  Rng rng(53);
  for (int t = 0; t < 20; ++t) {
    const auto sq = testing::random_sq(rng, 0.3, 1.7, 0.01, 0.035);
    std::vector<GraspCandidate> cands;
    try {
      cands = sample_candidates(sq, GripperSpec{});
    } catch (const Error&) {
      continue;
    }
    for (std::size_t i = 0; i < cands.size(); i += 5) {
      GraspCandidate real;
      REQUIRE(contacts_on(sq, cands[i], real));
      const double err0 = std::min((real.contacts[0] - cands[i].contacts[0]).norm(),
                                   (real.contacts[0] - cands[i].contacts[1]).norm());
      CHECK(err0 < 1e-7);
      CHECK((real.contacts[0] - real.contacts[1]).norm() ==
            doctest::Approx((cands[i].contacts[0] - cands[i].contacts[1]).norm()).epsilon(1e-6));
    }
  }
  // A closing line that misses the object entirely.
  Superquadric ball;
  ball.scale = {0.02, 0.02, 0.02};
  GraspCandidate far;
  far.pose.translation = Vec3(0, 0.5, 0);
  GraspCandidate out;
  CHECK_FALSE(contacts_on(ball, far, out));
}

TEST_CASE("swept volume and bin collisions") {
  const GripperSpec g;
  const auto sq = resting(0.02, 0.025, 0.03);
  const auto cands = sample_candidates(sq, g);
  const BinSpec bin;
  int top_down_free = 0;
  for (const auto& c : cands) {
    const auto pts = swept_volume(c, g);
    CHECK_FALSE(pts.empty());
    // Every swept point is within the gripper's reach of the center.
    const double reach = std::hypot(0.5 * c.width + g.finger_thickness, g.finger_length + 2 * g.palm_depth + 0.01);
    for (const auto& p : pts) CHECK((p - c.center()).norm() <= reach + 1e-9);
    if (c.approach.z() < -0.99) top_down_free += collision_check(c, bin, {}, g);
    // Approaching from below goes through the floor.
    if (c.approach.z() > 0.99) CHECK_FALSE(collision_check(c, bin, {}, g));
  }
  CHECK(top_down_free > 0);

  // Hard against a wall, side approaches from the wall side collide.
  const auto near_wall = resting(0.02, 0.02, 0.03, Vec3(0.5 * bin.inner_x - 0.021, 0, 0));
  bool blocked = false;
  for (const auto& c : sample_candidates(near_wall, g))
    if (c.approach.x() < -0.99) blocked = blocked || !collision_check(c, bin, {}, g);
  CHECK(blocked);
}

TEST_CASE("own-object clearance") {
  const GripperSpec g;
  const auto sq = resting(0.02, 0.025, 0.03);
  for (auto c : sample_candidates(sq, g)) {
    if (c.approach.z() > -0.99) continue;
    CHECK(finger_clearance(c, sq, g));
    c.width = 0.01;  // fingers would have to pass through the object
    CHECK_FALSE(finger_clearance(c, sq, g));
  }
}

TEST_CASE("closure margin: spheres tolerate offsets, creases do not") {
  const GripperSpec g;
  Superquadric ball = resting(0.03, 0.03, 0.03);
  ball.shape = {1.0, 1.0};
  Superquadric crease = resting(0.03, 0.03, 0.03);
  crease.shape = {1.8, 1.0};
  auto centered = [&](const Superquadric& sq) {
    for (const auto& c : sample_candidates(sq, g))
      if (c.approach.z() < -0.99 && (c.center() - sq.center()).norm() < 1e-9) return c;
    FAIL("no centered top-down candidate");
    return GraspCandidate{};
  };
  const auto cb = centered(ball);
  CHECK(robust_closure(ball, cb, g.friction_mu, 0.003));
  CHECK(robust_clearance(cb, ball, g, 0.003));
  const auto cc = centered(crease);
  CHECK(force_closure(cc, g.friction_mu));
  CHECK(robust_closure(crease, cc, g.friction_mu, 0.0));
  CHECK_FALSE(robust_closure(crease, cc, g.friction_mu, 0.003));
  GraspCandidate tight = cb;
  tight.width = 0.01;
  CHECK_FALSE(robust_clearance(tight, ball, g, 0.0));
}

TEST_CASE("quality filter") {
  const auto sq = resting(0.02, 0.025, 0.03);
  const auto fit = perfect_fit(sq);
  const auto cands = sample_candidates(sq, GripperSpec{});
  const auto all = filter_by_quality(cands, fit, 0.0);
  CHECK(all.size() == cands.size());
  for (const auto& c : all) {
    CHECK(c.regions[0] >= 0);
    CHECK(c.regions[1] >= 0);
  }
  CHECK(filter_by_quality(cands, fit, 1.0).empty());
  CHECK(filter_by_quality(cands, fit, default_sigma(fit.sample_n)).size() == cands.size());
}

TEST_CASE("plan: single sphere is picked first try") {
  Scene scene;
  Superquadric ball;
  ball.scale = {0.025, 0.025, 0.025};
  ball.pose.translation = Vec3(0, 0, 0.025);
  scene.objects.push_back({0, ball});
  std::map<int, FitResult> fits{{0, perfect_fit(ball)}};
  const auto plan = plan_scene(scene, fits, GripperSpec{});
  CHECK(plan.attempts == 1);
  CHECK(plan.gsr() == 1.0);
  CHECK(plan.termination == "cleared");
  CHECK(plan.remaining.empty());
}

TEST_CASE("plan: perfect fits clear a generated scene, deterministically") {
  SceneConfig sc;
  sc.scale_hi = 0.035;
  const Scene scene = generate_scene(BinSpec{}, 4, 9, sc);
  std::map<int, FitResult> fits;
  for (const auto& o : scene.objects) fits[o.id] = perfect_fit(o.sq);
  // Exact fits need no pose margin.
  PlanConfig exact;
  exact.closure_margin = 0.0;
  const auto a = plan_scene(scene, fits, GripperSpec{}, exact);
  const auto b = plan_scene(scene, fits, GripperSpec{}, exact);
  CHECK(a.successes == static_cast<int>(scene.objects.size()));
  CHECK(a.termination == "cleared");
  // The margin only drops candidates, so whatever it still tries works.
  const auto m = plan_scene(scene, fits, GripperSpec{});
  CHECK(m.attempts > 0);
  CHECK(m.successes == m.attempts);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].object_id == b.steps[i].object_id);
    CHECK(a.steps[i].cand.pose.translation == b.steps[i].cand.pose.translation);
  }
}

TEST_CASE("plan: ungraspable objects are unreachable, the grasp budget is honored") {
  Scene scene;
  Superquadric big;
  big.scale = {0.08, 0.08, 0.05};
  big.pose.translation = Vec3(0, 0, 0.05);
  scene.objects.push_back({3, big});
  std::map<int, FitResult> fits{{3, perfect_fit(big)}};
  const auto plan = plan_scene(scene, fits, GripperSpec{});
  CHECK(plan.attempts == 0);
  REQUIRE(plan.unreachable.size() == 1);
  CHECK(plan.unreachable[0] == 3);

  // A fit that is badly off: execution on the truth fails and retries run out.
  Scene s2;
  Superquadric ball;
  ball.scale = {0.02, 0.02, 0.02};
  ball.pose.translation = Vec3(0, 0, 0.02);
  s2.objects.push_back({0, ball});
  Superquadric wrong = ball;
  wrong.pose.translation = Vec3(0.1, 0.08, 0.02);
  std::map<int, FitResult> bad{{0, perfect_fit(wrong)}};
  PlanConfig pc;
  pc.max_retries = 2;
  const auto p2 = plan_scene(s2, bad, GripperSpec{}, pc);
  CHECK(p2.attempts == 3);
  CHECK(p2.successes == 0);
  CHECK(p2.termination == "exhausted");
  pc.max_grasps = 2;
  CHECK(plan_scene(s2, bad, GripperSpec{}, pc).termination == "max_grasps");
}
