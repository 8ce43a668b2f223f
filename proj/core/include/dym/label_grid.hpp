#pragma once

#include <vector>

#include <Eigen/Dense>

namespace dym {

/// Reduced-resolution left-view raster with color, metric depth, and a
/// ground-truth motion label per pixel. Label 0 is the static background.
struct LabelGrid {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> color;  // row-major, channels in [0,1]
  std::vector<double> depth;           // meters, > 0
  std::vector<int> gt_label;

  void resize(int w, int h) {
    width = w;
    height = h;
    color.assign(static_cast<std::size_t>(w) * h, Eigen::Vector3d::Zero());
    depth.assign(static_cast<std::size_t>(w) * h, 0.0);
    gt_label.assign(static_cast<std::size_t>(w) * h, 0);
  }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  bool contains(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
};

}  // namespace dym
