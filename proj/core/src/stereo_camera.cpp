#include "dym/stereo_camera.hpp"

#include <cmath>
#include <string>

namespace dym {

void StereoCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw ConfigError("stereo camera: focal lengths must be positive, got fx=" +
                      std::to_string(fx) + " fy=" + std::to_string(fy));
  }
  if (!(baseline > 0.0)) {
    throw ConfigError("stereo camera: baseline must be positive, got " +
                      std::to_string(baseline));
  }
  if (image_width <= 0 || image_height <= 0) {
    throw ConfigError("stereo camera: image size must be positive, got " +
                      std::to_string(image_width) + "x" +
                      std::to_string(image_height));
  }
  if (cx < 0.0 || cx > image_width || cy < 0.0 || cy > image_height) {
    throw ConfigError("stereo camera: principal point (" + std::to_string(cx) +
                      ", " + std::to_string(cy) + ") outside image " +
                      std::to_string(image_width) + "x" +
                      std::to_string(image_height));
  }
}

Eigen::Vector2d StereoCamera::project(const Eigen::Vector3d& p_cam) const {
  if (!(p_cam.z() > 0.0)) {
    throw BehindCamera("projection of point with z=" +
                       std::to_string(p_cam.z()));
  }
  return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
}

Eigen::Vector3d StereoCamera::triangulate(const Eigen::Vector2d& left_px,
                                          const Eigen::Vector2d& right_px) const {
  if (std::abs(left_px.y() - right_px.y()) >= 1.0) {
    throw EpipolarViolation("stereo rows differ by " +
                            std::to_string(left_px.y() - right_px.y()) +
                            " px");
  }
  const double disparity = left_px.x() - right_px.x();
  if (!(disparity > 0.0)) {
    throw NonPositiveDisparity("disparity " + std::to_string(disparity));
  }
  const double z = fx * baseline / disparity;
  return back_project(left_px, z);
}

StereoCamera StereoCamera::scaled(double s) const {
  StereoCamera out = *this;
  out.fx = fx * s;
  out.fy = fy * s;
  out.cx = cx * s;
  out.cy = cy * s;
  out.image_width = static_cast<int>(std::lround(image_width * s));
  out.image_height = static_cast<int>(std::lround(image_height * s));
  return out;
}

}  // namespace dym
