#include <doctest.h>

#include <sstream>

#include "sqgrasp/errors.hpp"
#include "sqgrasp/io.hpp"
#include "support.hpp"

using namespace sqgrasp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sqgrasp_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Usage;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

PointCloud parse(const std::string& text) {
  std::istringstream in(text);
  return io::parse_ply(in, "mem.ply");
}

}  // namespace

TEST_CASE("ply round trip keeps 9 significant digits and labels") {
  Rng rng(61);
  PointCloud c;
  for (int i = 0; i < 300; ++i) c.push_back(Vec3(rng.normal(), rng.uniform(-1e-3, 1e-3), 123.456789 * rng.uniform()), i % 7);
  const auto back = parse(io::format_ply(c));
  REQUIRE(back.size() == c.size());
  CHECK(back.labels == c.labels);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int k = 0; k < 3; ++k)
      CHECK(back.points[i][k] == doctest::Approx(c.points[i][k]).epsilon(1e-8).scale(1e-300));
  // Formatting is a fixed point after one round.
  CHECK(io::format_ply(back) == io::format_ply(parse(io::format_ply(back))));
}

TEST_CASE("ply reader: extra properties, comments, CRLF") {
  const std::string text =
      "ply\r\nformat ascii 1.0\r\ncomment made by hand\r\nelement vertex 2\r\nproperty float nx\r\n"
      "property float x\r\nproperty float y\r\nproperty float z\r\nproperty uchar red\r\n"
      "element face 0\r\nproperty list uchar int vertex_indices\r\nend_header\r\n"
      "0 1 2 3 255\r\n0 4 5 6 0\r\n";
  const auto c = parse(text);
  REQUIRE(c.size() == 2);
  CHECK(c.points[1] == Vec3(4, 5, 6));
  CHECK_FALSE(c.has_labels());
}

TEST_CASE("ply reader errors name the line") {
  const std::string head = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  CHECK(code_of([&] { parse(head + "1 2 3\n1 2\n"); }) == ErrorCode::ParseError);
  CHECK(message_of([&] { parse(head + "1 2 3\n1 2\n"); }).find("mem.ply:9") != std::string::npos);
  CHECK(message_of([&] { parse(head + "1 2 3\n1 x 3\n"); }).find("mem.ply:9") != std::string::npos);
  CHECK(message_of([&] { parse(head + "1 2 3\n"); }).find("end of file") != std::string::npos);
  CHECK(code_of([&] { parse("plx\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { parse("ply\nformat binary_little_endian 1.0\nend_header\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { parse("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n"); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([&] { parse(head + "1 2 nan\n1 2 3\n"); }) == ErrorCode::ParseError);
}

TEST_CASE("xyz reader") {
  std::istringstream in("# comment\n\n0.1 0.2 0.3\n0.4 0.5 0.6\n");
  const auto c = io::parse_xyz(in, "mem.xyz");
  REQUIRE(c.size() == 2);
  CHECK(c.points[1] == Vec3(0.4, 0.5, 0.6));
  std::istringstream bad("0.1 0.2 0.3\n0.1 0.2\n");
  CHECK(message_of([&] { io::parse_xyz(bad, "mem.xyz"); }).find("mem.xyz:2") != std::string::npos);
  std::istringstream labelled("1 2 3 4\n5 6 7 8\n");
  CHECK(io::parse_xyz(labelled, "l.xyz").labels == std::vector<int>{4, 8});
}

TEST_CASE("file io: dispatch, atomic writes, failures carry the path") {
  const fs::path dir = scratch("files");
  PointCloud c;
  c.push_back(Vec3(1, 2, 3));
  io::write_cloud(dir / "a.ply", c);
  io::write_cloud(dir / "a.xyz", c);
  CHECK(io::read_cloud(dir / "a.ply").points == c.points);
  CHECK(io::read_cloud(dir / "a.xyz").points == c.points);
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().string().find(".tmp") == std::string::npos);
  CHECK(code_of([&] { io::read_cloud(dir / "missing.ply"); }) == ErrorCode::IoFailure);
  CHECK(message_of([&] { io::read_cloud(dir / "missing.ply"); }).find("missing.ply") != std::string::npos);
  CHECK(code_of([&] { io::write_cloud(dir / "a.obj", c); }) == ErrorCode::IoFailure);
  io::write_text_atomic(dir / "t.json", "{bad");
  CHECK(code_of([&] { io::read_json(dir / "t.json"); }) == ErrorCode::ParseError);
  io::write_text_atomic(dir / "sub" / "deep" / "x.txt", "ok");
  CHECK(io::read_text(dir / "sub" / "deep" / "x.txt") == "ok");
}

TEST_CASE("json round trips") {
  Rng rng(62);
  const auto sq = testing::random_sq(rng);
  const auto back = io::sq_from_json(io::Json::parse(io::dump(io::to_json(sq))));
  CHECK(back.shape.eps1 == sq.shape.eps1);
  CHECK(back.scale.az == sq.scale.az);
  CHECK((back.pose.rotation - sq.pose.rotation).norm() < 1e-12);
  CHECK(back.pose.translation == sq.pose.translation);
  CHECK(io::to_json(sq)["quat"][0].get<double>() >= 0.0);

  Scene scene;
  scene.seed = 0xFFFFFFFFFFFFFFFFULL;
  scene.incomplete = true;
  scene.objects.push_back({4, sq});
  const Scene s2 = io::scene_from_json(io::Json::parse(io::dump(io::to_json(scene))));
  CHECK(s2.seed == scene.seed);
  CHECK(s2.incomplete);
  REQUIRE(s2.objects.size() == 1);
  CHECK(s2.objects[0].id == 4);
  CHECK(s2.bin.inner_x == scene.bin.inner_x);

  Manifest m;
  m.seed = 9;
  m.scene_paths = {"scene_0000/scene.json"};
  m.rows.push_back({0, 2, 4, 0.25, "a.ply", "a.json"});
  const Manifest m2 = io::manifest_from_json(io::to_json(m));
  CHECK(m2.rows.size() == 1);
  CHECK(m2.rows[0].view == 2);
  CHECK(m2.rows[0].occlusion_ratio == 0.25);
  CHECK(io::dump(io::to_json(m2)) == io::dump(io::to_json(m)));
}

TEST_CASE("json schema errors") {
  CHECK(code_of([] { io::sq_from_json(io::Json{{"eps1", 1.0}}); }) == ErrorCode::ParseError);
  io::Json j = io::to_json(Superquadric{});
  j["eps1"] = "one";
  CHECK(code_of([&] { io::sq_from_json(j); }) == ErrorCode::ParseError);
  j = io::to_json(Superquadric{});
  j["quat"] = {0, 0, 0, 0};
  CHECK(code_of([&] { io::sq_from_json(j); }) == ErrorCode::ParseError);
  io::Json m = io::to_json(Manifest{});
  m["format"] = 2;
  CHECK(code_of([&] { io::manifest_from_json(m); }) == ErrorCode::ParseError);
}
