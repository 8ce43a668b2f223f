#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dym {

/// A feature seen in two consecutive frames, triangulated in each frame's
/// camera coordinates.
struct Correspondence3D {
  std::int64_t track_id = -1;
  Eigen::Vector3d p_prev = Eigen::Vector3d::Zero();
  Eigen::Vector3d p_curr = Eigen::Vector3d::Zero();
  // Relative confidence used by least-squares refits. Stereo depth error
  // grows like z^2, so callers triangulating from disparity typically set
  // this to an inverse depth variance; 1 keeps the fit unweighted.
  double weight = 1.0;
};

/// One stereo feature observation in a single frame.
struct StereoFeature {
  std::int64_t track_id = -1;
  double ul = 0.0;
  double vl = 0.0;
  double ur = 0.0;
  double vr = 0.0;
  int gt_label = -1;  // ground-truth motion label when available, else -1
};

using FrameFeatures = std::vector<StereoFeature>;

}  // namespace dym
