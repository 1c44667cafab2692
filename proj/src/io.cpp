#include "sqgrasp/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "sqgrasp/errors.hpp"

namespace sqgrasp::io {

namespace {

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool to_double(std::string_view s, double& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(out);
}

bool to_int(std::string_view s, long long& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool is_integer_type(std::string_view t) {
  for (const char* name : {"char", "uchar", "short", "ushort", "int", "uint", "int8", "uint8", "int16", "uint16",
                           "int32", "uint32"})
    if (t == name) return true;
  return false;
}

void append_number(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out += buf;
}

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::ParseError, std::string("field '") + key + "' has the wrong type");
  }
}

Vec3 vec3_field(const Json& j, const char* key) {
  const auto v = field<std::vector<double>>(j, key);
  if (v.size() != 3) throw Error(ErrorCode::ParseError, std::string("field '") + key + "' needs 3 numbers");
  return Vec3(v[0], v[1], v[2]);
}

Json vec(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

PointCloud parse_ply(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](bool required) {
    if (!std::getline(in, line)) {
      if (required) parse_fail(source, lineno + 1, "unexpected end of file");
      return false;
    }
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  next(true);
  if (line != "ply") parse_fail(source, lineno, "missing 'ply' magic");
  long long n_vertices = -1;
  bool in_vertex = false;
  bool vertex_seen = false;
  std::vector<std::string> props;
  std::vector<bool> integer_prop;
  // Elements declared before the vertex element would precede it in the body.
  bool vertex_first = true;
  while (true) {
    next(true);
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") parse_fail(source, lineno, "only ascii PLY is supported");
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(source, lineno, "malformed element line");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (!to_int(tok[2], n_vertices) || n_vertices < 0) parse_fail(source, lineno, "bad vertex count");
        vertex_seen = true;
      } else if (!vertex_seen) {
        vertex_first = false;
      }
    } else if (tok[0] == "property") {
      if (!in_vertex) continue;
      if (tok.size() < 3) parse_fail(source, lineno, "malformed property line");
      if (tok[1] == "list") parse_fail(source, lineno, "list properties on vertices are not supported");
      props.emplace_back(tok[2]);
      integer_prop.push_back(is_integer_type(tok[1]));
    } else {
      parse_fail(source, lineno, "unknown header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!vertex_seen) parse_fail(source, lineno, "no vertex element");
  if (!vertex_first) parse_fail(source, lineno, "vertex element must come first");
  int ix = -1, iy = -1, iz = -1, il = -1;
  for (std::size_t k = 0; k < props.size(); ++k) {
    if (props[k] == "x") ix = int(k);
    if (props[k] == "y") iy = int(k);
    if (props[k] == "z") iz = int(k);
    if (props[k] == "label" && integer_prop[k]) il = int(k);
  }
  if (ix < 0 || iy < 0 || iz < 0) parse_fail(source, lineno, "vertex element lacks x, y or z");

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(n_vertices));
  for (long long v = 0; v < n_vertices; ++v) {
    next(true);
    const auto tok = split(line);
    if (tok.size() != props.size())
      parse_fail(source, lineno, "expected " + std::to_string(props.size()) + " values, got " + std::to_string(tok.size()));
    Vec3 p;
    const int idx[3] = {ix, iy, iz};
    for (int k = 0; k < 3; ++k)
      if (!to_double(tok[idx[k]], p[k])) parse_fail(source, lineno, "bad number '" + std::string(tok[idx[k]]) + "'");
    if (il >= 0) {
      long long label;
      if (!to_int(tok[il], label) || label < 0 || label > 0x7fffffff) parse_fail(source, lineno, "bad label");
      cloud.push_back(p, static_cast<int>(label));
    } else {
      cloud.push_back(p);
    }
  }
  return cloud;
}

PointCloud parse_xyz(std::istream& in, const std::string& source) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  int columns = -1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok.size() != 3 && tok.size() != 4) parse_fail(source, lineno, "expected 3 or 4 columns");
    if (columns < 0) columns = int(tok.size());
    if (int(tok.size()) != columns) parse_fail(source, lineno, "column count changed");
    Vec3 p;
    for (int k = 0; k < 3; ++k)
      if (!to_double(tok[k], p[k])) parse_fail(source, lineno, "bad number '" + std::string(tok[k]) + "'");
    if (columns == 4) {
      long long label;
      if (!to_int(tok[3], label) || label < 0 || label > 0x7fffffff) parse_fail(source, lineno, "bad label");
      cloud.push_back(p, static_cast<int>(label));
    } else {
      cloud.push_back(p);
    }
  }
  return cloud;
}

std::string format_ply(const PointCloud& cloud) {
  cloud.validate();
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\n";
  if (cloud.has_labels()) out += "property uint label\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    append_number(out, p.x());
    out += ' ';
    append_number(out, p.y());
    out += ' ';
    append_number(out, p.z());
    if (cloud.has_labels()) {
      if (cloud.labels[i] < 0) throw Error(ErrorCode::IoFailure, "PLY labels must be non-negative");
      out += ' ' + std::to_string(cloud.labels[i]);
    }
    out += '\n';
  }
  return out;
}

std::string format_xyz(const PointCloud& cloud) {
  cloud.validate();
  std::string out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    append_number(out, p.x());
    out += ' ';
    append_number(out, p.y());
    out += ' ';
    append_number(out, p.z());
    if (cloud.has_labels()) out += ' ' + std::to_string(cloud.labels[i]);
    out += '\n';
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PointCloud read_cloud(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  const auto ext = path.extension().string();
  if (ext == ".ply") return parse_ply(in, path.string());
  if (ext == ".xyz" || ext == ".txt") return parse_xyz(in, path.string());
  throw Error(ErrorCode::IoFailure, "unknown point cloud extension: " + path.string());
}

void write_cloud(const fs::path& path, const PointCloud& cloud) {
  const auto ext = path.extension().string();
  if (ext == ".ply") return write_text_atomic(path, format_ply(cloud));
  if (ext == ".xyz" || ext == ".txt") return write_text_atomic(path, format_xyz(cloud));
  throw Error(ErrorCode::IoFailure, "unknown point cloud extension: " + path.string());
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoFailure, "cannot rename onto " + path.string());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

Json to_json(const Pose& pose) {
  const auto q = canonical_quaternion(pose.rotation);
  return {{"quat", {q[0], q[1], q[2], q[3]}}, {"t", vec(pose.translation)}};
}

Pose pose_from_json(const Json& j) {
  const auto q = field<std::vector<double>>(j, "quat");
  if (q.size() != 4) throw Error(ErrorCode::ParseError, "field 'quat' needs 4 numbers");
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!(n > 0)) throw Error(ErrorCode::ParseError, "zero quaternion");
  Pose p;
  p.rotation = rotation_from_quaternion({q[0] / n, q[1] / n, q[2] / n, q[3] / n});
  p.translation = vec3_field(j, "t");
  return p;
}

Json to_json(const Superquadric& sq) {
  Json j = to_json(sq.pose);
  return {{"eps1", sq.shape.eps1}, {"eps2", sq.shape.eps2}, {"ax", sq.scale.ax}, {"ay", sq.scale.ay},
          {"az", sq.scale.az},     {"quat", j["quat"]},     {"t", j["t"]}};
}

Superquadric sq_from_json(const Json& j) {
  Superquadric sq;
  sq.shape = {field<double>(j, "eps1"), field<double>(j, "eps2")};
  sq.scale = {field<double>(j, "ax"), field<double>(j, "ay"), field<double>(j, "az")};
  sq.pose = pose_from_json(j);
  if (!sq.is_valid()) throw Error(ErrorCode::ParseError, "superquadric parameters out of range");
  return sq;
}

Json to_json(const FitResult& fit) {
  return {{"format", 1},
          {"sq", to_json(fit.sq)},
          {"chamfer_mm2", fit.chamfer * 1e6},
          {"n_regions", fit.n_regions},
          {"region_scores", fit.regions.scores},
          {"converged", fit.converged},
          {"post_applied", fit.post_applied},
          {"post_degenerate", fit.post_degenerate},
          {"best_start", fit.best_start},
          {"iterations", fit.iterations},
          {"sample_n", fit.sample_n},
          {"residual_history", fit.residual_history}};
}

Json to_json(const GraspPlan& plan) {
  Json steps = Json::array();
  for (const auto& s : plan.steps) {
    Json pose = to_json(s.cand.pose);
    steps.push_back({{"object_id", s.object_id},
                     {"pose", pose},
                     {"width_m", s.cand.width},
                     {"priority", s.cand.priority},
                     {"region_id", {s.cand.regions[0], s.cand.regions[1]}},
                     {"family", s.cand.family},
                     {"success", s.success}});
  }
  return {{"format", 1},
          {"steps", steps},
          {"summary",
           {{"attempts", plan.attempts},
            {"successes", plan.successes},
            {"gsr", plan.gsr()},
            {"termination", plan.termination},
            {"unreachable", plan.unreachable},
            {"remaining", plan.remaining}}}};
}

Json to_json(const BinSpec& bin) {
  return {{"inner_x", bin.inner_x},
          {"inner_y", bin.inner_y},
          {"wall_height", bin.wall_height},
          {"wall_thickness", bin.wall_thickness},
          {"pose", to_json(bin.pose)}};
}

BinSpec bin_from_json(const Json& j) {
  BinSpec b;
  b.inner_x = field<double>(j, "inner_x");
  b.inner_y = field<double>(j, "inner_y");
  b.wall_height = field<double>(j, "wall_height");
  b.wall_thickness = field<double>(j, "wall_thickness");
  if (j.contains("pose")) b.pose = pose_from_json(j.at("pose"));
  b.validate();
  return b;
}

Json to_json(const Scene& scene) {
  Json objects = Json::array();
  for (const auto& o : scene.objects) objects.push_back({{"id", o.id}, {"sq", to_json(o.sq)}});
  return {{"format", 1},
          {"seed", scene.seed},
          {"incomplete", scene.incomplete},
          {"bin", to_json(scene.bin)},
          {"objects", objects}};
}

Scene scene_from_json(const Json& j) {
  Scene s;
  s.seed = field<std::uint64_t>(j, "seed");
  s.incomplete = j.value("incomplete", false);
  s.bin = bin_from_json(field<Json>(j, "bin"));
  for (const auto& o : field<Json>(j, "objects")) s.objects.push_back({field<int>(o, "id"), sq_from_json(field<Json>(o, "sq"))});
  return s;
}

Json to_json(const Manifest& m) {
  Json rows = Json::array();
  for (const auto& r : m.rows)
    rows.push_back({{"scene", r.scene},
                    {"view", r.view},
                    {"object", r.object},
                    {"occlusion_ratio", r.occlusion_ratio},
                    {"cloud", r.cloud_path},
                    {"gt", r.gt_path}});
  return {{"format", m.format}, {"seed", m.seed}, {"scenes", m.scene_paths}, {"rows", rows}};
}

Manifest manifest_from_json(const Json& j) {
  Manifest m;
  m.format = field<int>(j, "format");
  if (m.format != 1) throw Error(ErrorCode::ParseError, "unsupported manifest format " + std::to_string(m.format));
  m.seed = field<std::uint64_t>(j, "seed");
  m.scene_paths = field<std::vector<std::string>>(j, "scenes");
  for (const auto& r : field<Json>(j, "rows")) {
    ManifestRow row;
    row.scene = field<int>(r, "scene");
    row.view = field<int>(r, "view");
    row.object = field<int>(r, "object");
    row.occlusion_ratio = field<double>(r, "occlusion_ratio");
    row.cloud_path = field<std::string>(r, "cloud");
    row.gt_path = field<std::string>(r, "gt");
    m.rows.push_back(row);
  }
  return m;
}

}  // namespace sqgrasp::io
