#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dym/geometry.hpp"
#include "dym/stereo_camera.hpp"

namespace dym::sim {

enum class ShapeKind { kBox, kCylinder };

/// A rigid body rendered as feature points on the surface of a simple solid.
struct ObjectSpec {
  int point_count = 0;
  ShapeKind shape = ShapeKind::kBox;
  // Box: full side lengths. Cylinder: x = diameter, z = height (axis along z).
  Eigen::Vector3d extent = {0.3, 0.3, 0.3};
  std::vector<Pose> trajectory;  // object frame -> world, one pose per frame
  Eigen::Vector3d base_color = {0.8, 0.3, 0.2};
};

/// Full description of a synthetic stereo sequence. The static environment is
/// the interior of an axis-aligned box (walls, floor, ceiling); the camera is
/// expected to move inside it.
struct SceneSpec {
  int static_point_count = 0;
  Eigen::Vector3d static_bounds_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d static_bounds_max = Eigen::Vector3d::Zero();
  std::vector<ObjectSpec> objects;
  std::vector<Pose> camera_trajectory;  // camera frame -> world, per frame
  StereoCamera camera;
  double pixel_noise_sigma = 0.0;
  int frame_count = 0;
  std::uint64_t rng_seed = 0;
  double far_plane = 40.0;   // depth assigned to empty grid pixels
  double grid_scale = 1.0;   // label grid resolution relative to the camera

  void validate() const;  // throws ConfigError
};

struct TrackObservation {
  std::int64_t track_id = -1;
  Eigen::Vector2d left_px = Eigen::Vector2d::Zero();
  Eigen::Vector2d right_px = Eigen::Vector2d::Zero();
  int gt_label = 0;  // 0 static, i+1 for object i
};

/// Everything observed at one frame. Poses are expressed in the global frame,
/// which is the camera frame of the first observation.
struct FrameObservation {
  int frame_index = 0;
  std::vector<TrackObservation> tracks;
  Pose gt_camera_pose;                // camera frame -> global
  std::vector<Pose> gt_object_poses;  // object frame -> global, per object
};

}  // namespace dym::sim
