#pragma once

#include <Eigen/Dense>

#include "dym/errors.hpp"

namespace dym {

/// Rectified stereo rig: identical pinhole intrinsics for both views, the
/// right camera displaced along +x by the baseline. All pixel quantities
/// refer to the left image unless stated otherwise.
struct StereoCamera {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double baseline = 0.0;  // meters
  int image_width = 0;
  int image_height = 0;

  /// Throws ConfigError when intrinsics violate their documented ranges.
  void validate() const;

  /// Left-image pinhole projection of a point in the camera frame.
  /// Throws BehindCamera for z <= 0. Does not check image bounds.
  Eigen::Vector2d project(const Eigen::Vector3d& p_cam) const;

  double disparity_at(double z) const { return fx * baseline / z; }

  bool in_image(const Eigen::Vector2d& px) const {
    return px.x() >= 0.0 && px.x() <= image_width - 1.0 && px.y() >= 0.0 &&
           px.y() <= image_height - 1.0;
  }

  /// Back-projects a rectified stereo match to the left camera frame.
  ///
  /// z = fx * baseline / disparity; x, y from the left pixel ray.
  /// Throws NonPositiveDisparity when left.x <= right.x and
  /// EpipolarViolation when the rows differ by a pixel or more.
  Eigen::Vector3d triangulate(const Eigen::Vector2d& left_px,
                              const Eigen::Vector2d& right_px) const;

  /// Back-projects a left pixel with known depth.
  Eigen::Vector3d back_project(const Eigen::Vector2d& px, double z) const {
    return {(px.x() - cx) / fx * z, (px.y() - cy) / fy * z, z};
  }

  /// Same rig at a uniformly scaled resolution (used for reduced label grids).
  StereoCamera scaled(double s) const;
};

}  // namespace dym
