#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "sqgrasp/cloud.hpp"
#include "sqgrasp/fitting.hpp"
#include "sqgrasp/geometry.hpp"
#include "sqgrasp/grasp.hpp"
#include "sqgrasp/scene.hpp"

namespace sqgrasp::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// ASCII PLY with a vertex element; x, y, z and an optional integer label
/// property, any other vertex properties are skipped. Parse errors name the
/// source and line.
PointCloud parse_ply(std::istream& in, const std::string& source);
/// One point per line, optional fourth integer column as label. Blank lines
/// and lines starting with '#' are skipped.
PointCloud parse_xyz(std::istream& in, const std::string& source);
std::string format_ply(const PointCloud& cloud);
std::string format_xyz(const PointCloud& cloud);

/// Dispatch on the extension (.ply or .xyz). IoFailure if unreadable.
PointCloud read_cloud(const fs::path& path);
void write_cloud(const fs::path& path, const PointCloud& cloud);

std::string read_text(const fs::path& path);
/// Writes to a sibling temp file, then renames over the target.
void write_text_atomic(const fs::path& path, const std::string& content);
/// Two-space indent and a trailing newline.
std::string dump(const Json& j);
Json read_json(const fs::path& path);

Json to_json(const Pose& pose);
Pose pose_from_json(const Json& j);
Json to_json(const Superquadric& sq);
Superquadric sq_from_json(const Json& j);

Json to_json(const FitResult& fit);
Json to_json(const GraspPlan& plan);

Json to_json(const BinSpec& bin);
BinSpec bin_from_json(const Json& j);
Json to_json(const Scene& scene);
Scene scene_from_json(const Json& j);

Json to_json(const Manifest& m);
Manifest manifest_from_json(const Json& j);

}  // namespace sqgrasp::io
