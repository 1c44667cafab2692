#include <doctest.h>

#include <set>

#include "sqgrasp/cloud_ops.hpp"
#include "sqgrasp/errors.hpp"
#include "sqgrasp/neighbor_index.hpp"
#include "sqgrasp/serial_reference.hpp"
#include "support.hpp"

using namespace sqgrasp;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n, double half = 0.1) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.push_back(Vec3(rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half)));
  return c;
}

// Plain double loop, written out independently of the library.
double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  double ab = 0, ba = 0;
  for (const auto& p : a.points) ab += testing::nearest_sq(b.points, p);
  for (const auto& p : b.points) ba += testing::nearest_sq(a.points, p);
  return ab / a.size() + ba / b.size();
}

}  // namespace

TEST_CASE("kd-tree nearest equals a linear scan, ties to the lowest index") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto cloud = random_cloud(rng, 1 + rng.below(600));
    // Duplicates make ties.
    for (int k = 0; k < 20; ++k) cloud.push_back(cloud.points[rng.below(cloud.size())]);
    const NeighborIndex idx(cloud);
    for (int q = 0; q < 200; ++q) {
      const Vec3 query = q % 4 == 0 ? cloud.points[rng.below(cloud.size())]
                                    : Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
      std::size_t best = 0;
      double bd = INFINITY;
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double d = squared_distance(cloud.points[i], query);
        if (d < bd) {
          bd = d;
          best = i;
        }
      }
      const auto hit = idx.nearest(query);
      CHECK(hit.index == best);
      CHECK(hit.sq_dist == bd);
      const auto s = serial::nearest(cloud.points, query);
      CHECK(s.index == best);
    }
  }
}

TEST_CASE("count_within matches brute force") {
  Rng rng(22);
  const auto cloud = random_cloud(rng, 800);
  const NeighborIndex idx(cloud);
  for (int q = 0; q < 100; ++q) {
    const Vec3 c(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    const double r = rng.uniform(0.0, 0.05);
    std::size_t n = 0;
    for (const auto& p : cloud.points) n += squared_distance(p, c) <= r * r;
    CHECK(idx.count_within(c, r) == n);
  }
}

TEST_CASE("batched nearest equals single queries") {
  Rng rng(23);
  const auto cloud = random_cloud(rng, 500);
  const auto queries = random_cloud(rng, 300);
  const NeighborIndex idx(cloud);
  const auto hits = idx.nearest_all(queries.points);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CHECK(hits[i].index == idx.nearest(queries.points[i]).index);
    CHECK(hits[i].sq_dist == idx.nearest(queries.points[i]).sq_dist);
  }
}

TEST_CASE("chamfer distance equals the double loop") {
  Rng rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_cloud(rng, 1 + rng.below(300));
    const auto b = random_cloud(rng, 1 + rng.below(300));
    const double ref = brute_chamfer(a, b);
    CHECK(chamfer_distance(a, b) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(serial::chamfer_distance(a, b) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("chamfer properties") {
  Rng rng(25);
  const auto a = random_cloud(rng, 200);
  const auto b = random_cloud(rng, 150);
  CHECK(chamfer_distance(a, a) == 0.0);
  CHECK(chamfer_distance(a, b) == doctest::Approx(chamfer_distance(b, a)).epsilon(1e-14));
  CHECK(chamfer_distance(a, b) > 0.0);
  CHECK_THROWS_AS(chamfer_distance(a, PointCloud{}), Error);
}

TEST_CASE("farthest point sampling matches the serial reference and spreads out") {
  Rng rng(26);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cloud = random_cloud(rng, 300 + rng.below(500));
    const std::size_t n = 50 + rng.below(100);
    const auto idx = fps_indices(cloud, n);
    CHECK(idx == serial::fps_indices(cloud, n));
    REQUIRE(idx.size() == n);
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == n);

    // Each pick is the point farthest from those already chosen, and the
    // covering radius never grows.
    std::vector<double> d(cloud.size(), INFINITY);
    double prev = INFINITY;
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) {
        const double got = d[idx[k]];
        double best = 0;
        for (double v : d) best = std::max(best, v);
        CHECK(got == best);
        CHECK(got <= prev);
        prev = got;
      }
      for (std::size_t i = 0; i < cloud.size(); ++i) d[i] = std::min(d[i], squared_distance(cloud.points[i], cloud.points[idx[k]]));
    }
  }
}

TEST_CASE("fps downsample keeps small clouds and carries labels") {
  Rng rng(27);
  auto cloud = random_cloud(rng, 100);
  for (int i = 0; i < 100; ++i) cloud.labels.push_back(i);
  CHECK(fps_downsample(cloud, 200).points == cloud.points);
  const auto d = fps_downsample(cloud, 10);
  REQUIRE(d.size() == 10);
  REQUIRE(d.labels.size() == 10);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.points[i] == cloud.points[d.labels[i]]);
}

TEST_CASE("outlier removal drops the floor and stray points") {
  Rng rng(28);
  Superquadric sq;
  sq.scale = {0.03, 0.03, 0.03};
  sq.pose.translation = Vec3(0, 0, 0.035);
  PointCloud cloud;
  for (const auto& p : sample_surface(sq, 1500, 1).points)
    if (p.z() > 0.02) cloud.push_back(p);
  const std::size_t object = cloud.size();
  for (int i = 0; i < 1500; ++i) cloud.push_back(Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 0.0));
  for (int i = 0; i < 10; ++i) cloud.push_back(Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.3, 0.5)));

  const auto plane = ransac_floor_plane(cloud, {});
  CHECK(plane.inliers >= 1500);
  CHECK(std::abs(plane.normal.z()) > 0.99);

  const auto kept = remove_outliers(cloud);
  for (const auto& p : kept.points) {
    CHECK(p.z() > 0.003);
    CHECK(p.z() < 0.1);
  }
  CHECK(kept.size() >= object * 9 / 10);
  CHECK_THROWS_AS(remove_outliers(random_cloud(rng, 5)), Error);
}

TEST_CASE("an object's own flat top is not a floor") {
  Superquadric box;
  box.shape = {0.2, 0.2};
  box.scale = {0.04, 0.03, 0.02};
  box.pose.translation = Vec3(0, 0, 0.02);
  PointCloud top;
  for (const auto& p : sample_surface(box, 3000, 2).points)
    if (normal_at(box, p).z() > 0) top.push_back(p);
  CHECK(remove_outliers(top).size() >= top.size() * 95 / 100);
}

TEST_CASE("closed-form rigid transform recovers a known motion") {
  Rng rng(29);
  const auto src = random_cloud(rng, 50);
  const Pose t{testing::random_rotation(rng), Vec3(0.1, 0.2, -0.1)};
  std::vector<Vec3> dst;
  for (const auto& p : src.points) dst.push_back(t.apply(p));
  RigidTransform est;
  REQUIRE(best_rigid_transform(src.points, dst, est));
  CHECK((est.rotation - t.rotation).norm() < 1e-9);
  CHECK((est.translation - t.translation).norm() < 1e-9);
}

TEST_CASE("icp aligns a slightly moved copy") {
  Superquadric sq;
  sq.shape = {0.6, 0.9};
  sq.scale = {0.03, 0.05, 0.04};
  const auto target = sample_surface(sq, 2000, 5);
  const Pose motion{axis_angle(Vec3(1, 1, 0), 0.08), Vec3(0.004, -0.003, 0.002)};
  const auto source = transform_cloud(target, motion);
  const auto r = icp_align(source, target);
  const Vec3 p(0.01, 0.02, -0.01);
  CHECK((r.transform.apply(motion.apply(p)) - p).norm() < 5e-4);
  CHECK(r.fitness < 1e-6);
  for (std::size_t i = 1; i < r.mse_history.size(); ++i) CHECK(r.mse_history[i] <= r.mse_history[i - 1] + 1e-15);
}

TEST_CASE("icp rejects collinear input") {
  PointCloud line;
  for (int i = 0; i < 50; ++i) line.push_back(Vec3(0.01 * i, 0, 0));
  CHECK_THROWS_AS(icp_align(line, line), Error);
}

TEST_CASE("pca frame is right-handed and sorted") {
  Rng rng(30);
  PointCloud c;
  for (int i = 0; i < 2000; ++i) c.push_back(Vec3(0.1 * rng.normal(), 0.03 * rng.normal(), 0.01 * rng.normal()));
  const Pose rot{testing::random_rotation(rng), Vec3(0.2, 0.1, 0.0)};
  const auto f = pca_frame(transform_cloud(c, rot));
  CHECK(f.pose.rotation.determinant() == doctest::Approx(1.0));
  CHECK(f.eigenvalues[0] >= f.eigenvalues[1]);
  CHECK(f.eigenvalues[1] >= f.eigenvalues[2]);
  CHECK(std::abs(f.pose.rotation.col(0).dot(rot.rotation.col(0))) > 0.99);
  CHECK((f.pose.translation - rot.translation).norm() < 0.01);
  PointCloud flat;
  for (int i = 0; i < 100; ++i) flat.push_back(Vec3(rng.uniform(), rng.uniform(), 0));
  CHECK_THROWS_AS(pca_frame(flat), Error);
}
