#include "dym/recon/export.hpp"

#include <set>
#include <sstream>
#include <string>

#include "dym/io/formats.hpp"

namespace dym::recon {

namespace {

std::string object_cloud_name(int label) {
  return "object_" + std::to_string(label) + ".ply";
}
std::string object_trajectory_name(int label) {
  return "trajectory_object_" + std::to_string(label) + ".txt";
}

const std::string& manifest_value(
    const std::map<std::string, std::string>& manifest, const std::string& key,
    const std::filesystem::path& path) {
  const auto it = manifest.find(key);
  if (it == manifest.end()) {
    throw ParseError(path.string(), 0, "manifest is missing key: " + key);
  }
  return it->second;
}

int parse_int(const std::string& text, const std::string& key,
              const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string(), 0, "bad integer for " + key + ": " + text);
  }
}

}  // namespace

void SceneExport::validate() const {
  if (frame_count < 0) throw ConfigError("frame_count must be >= 0");
  if (static_map.frame != FrameTag::kGlobal) {
    throw ConfigError("static map must be tagged global");
  }
  if (static_map.points.size() != static_map.colors.size()) {
    throw ConfigError("static map points and colors differ in size");
  }
  if (camera_poses.size() != static_cast<std::size_t>(frame_count)) {
    throw ConfigError("camera trajectory must cover every frame");
  }
  std::set<int> labels;
  for (const ExportObject& obj : objects) {
    if (obj.label <= 0) throw ConfigError("object labels must be positive");
    if (!labels.insert(obj.label).second) {
      throw ConfigError("duplicate object label " + std::to_string(obj.label));
    }
    if (obj.cloud.frame != FrameTag::kObjectEgocentric) {
      throw ConfigError("object clouds must be tagged egocentric");
    }
    if (obj.cloud.points.size() != obj.cloud.colors.size()) {
      throw ConfigError("object cloud points and colors differ in size");
    }
    if (obj.poses.empty()) {
      throw ConfigError("object " + std::to_string(obj.label) +
                        " has no trajectory");
    }
    if (obj.birth_frame < 0 ||
        obj.birth_frame + obj.poses.size() >
            static_cast<std::size_t>(frame_count)) {
      throw ConfigError("object " + std::to_string(obj.label) +
                        " trajectory does not fit inside the sequence");
    }
  }
}

void export_scene(const SceneExport& scene, const std::filesystem::path& dir) {
  scene.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create directory: " + dir.string());

  io::write_ply(dir / "static_map.ply", scene.static_map);

  std::vector<double> camera_times(scene.camera_poses.size());
  for (std::size_t i = 0; i < camera_times.size(); ++i) {
    camera_times[i] = static_cast<double>(i);
  }
  io::write_trajectory(dir / "trajectory_camera.txt", camera_times,
                       scene.camera_poses);

  io::KeyValues manifest;
  manifest.emplace_back("frame_count", std::to_string(scene.frame_count));
  manifest.emplace_back("static_map", "static_map.ply");
  manifest.emplace_back("camera_trajectory", "trajectory_camera.txt");
  manifest.emplace_back("object_count", std::to_string(scene.objects.size()));
  std::ostringstream labels;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (i) labels << ' ';
    labels << scene.objects[i].label;
  }
  manifest.emplace_back("labels", labels.str());

  for (const ExportObject& obj : scene.objects) {
    io::write_ply(dir / object_cloud_name(obj.label), obj.cloud);
    std::vector<double> times(obj.poses.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      times[i] = static_cast<double>(obj.birth_frame + static_cast<int>(i));
    }
    io::write_trajectory(dir / object_trajectory_name(obj.label), times,
                         obj.poses);
    const std::string prefix = "object_" + std::to_string(obj.label);
    manifest.emplace_back(prefix + "_cloud", object_cloud_name(obj.label));
    manifest.emplace_back(prefix + "_trajectory",
                          object_trajectory_name(obj.label));
    manifest.emplace_back(prefix + "_birth_frame",
                          std::to_string(obj.birth_frame));
  }
  io::write_key_value_file(dir / "manifest.txt", manifest,
                           "scene export manifest");
}

SceneExport read_scene(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.txt";
  const auto sections = io::read_key_value_file(manifest_path);
  const auto flat = sections.find("");
  if (flat == sections.end()) {
    throw ParseError(manifest_path.string(), 0, "empty manifest");
  }
  const auto& manifest = flat->second;

  SceneExport scene;
  scene.frame_count = parse_int(
      manifest_value(manifest, "frame_count", manifest_path), "frame_count",
      manifest_path);
  scene.static_map =
      io::read_ply(dir / manifest_value(manifest, "static_map", manifest_path));
  scene.static_map.frame = FrameTag::kGlobal;

  const auto camera = io::read_trajectory(
      dir / manifest_value(manifest, "camera_trajectory", manifest_path));
  scene.camera_poses = camera.poses;

  std::istringstream labels(manifest_value(manifest, "labels", manifest_path));
  int label = 0;
  while (labels >> label) {
    ExportObject obj;
    obj.label = label;
    const std::string prefix = "object_" + std::to_string(label);
    obj.cloud = io::read_ply(
        dir / manifest_value(manifest, prefix + "_cloud", manifest_path));
    obj.cloud.frame = FrameTag::kObjectEgocentric;
    const auto traj = io::read_trajectory(
        dir / manifest_value(manifest, prefix + "_trajectory", manifest_path));
    obj.poses = traj.poses;
    obj.birth_frame = parse_int(
        manifest_value(manifest, prefix + "_birth_frame", manifest_path),
        prefix + "_birth_frame", manifest_path);
    scene.objects.push_back(std::move(obj));
  }
  scene.validate();
  return scene;
}

}  // namespace dym::recon
