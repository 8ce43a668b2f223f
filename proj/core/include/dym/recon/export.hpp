#pragma once

#include <filesystem>
#include <vector>

#include "dym/recon/cloud.hpp"

namespace dym::recon {

/// One reconstructed object ready for export. The cloud is egocentric in
/// the anchored sense: transforming each point by the frame-t object pose
/// places it at its true frame-t position in the global frame.
struct ExportObject {
  int label = 0;
  int birth_frame = 0;
  PointCloud cloud;
  std::vector<Pose> poses;  // object -> global, poses[i] is frame birth_frame + i
};

/// The full 4D result: a static map, the camera trajectory, and per-object
/// models with their trajectories.
struct SceneExport {
  int frame_count = 0;
  PointCloud static_map;
  std::vector<Pose> camera_poses;  // camera -> global, one per frame
  std::vector<ExportObject> objects;

  /// Throws ConfigError unless every object label is positive and unique,
  /// trajectories fit inside [0, frame_count), the camera covers every
  /// frame, and frame tags are consistent.
  void validate() const;
};

/// Writes the scene into a directory: static_map.ply, trajectory_camera.txt,
/// object_<label>.ply and trajectory_object_<label>.txt per object, and a
/// manifest.txt tying them together. Trajectory timestamps are frame
/// indices in seconds. Creates the directory if needed. Throws ConfigError
/// on an invalid export and IoFailure naming the path that failed.
void export_scene(const SceneExport& scene, const std::filesystem::path& dir);

/// Reads back a directory written by export_scene. Throws IoFailure when
/// files are missing and ParseError on malformed content.
SceneExport read_scene(const std::filesystem::path& dir);

}  // namespace dym::recon
