#pragma once

#include <utility>
#include <vector>

#include "dym/label_grid.hpp"
#include "dym/sim/scene.hpp"

namespace dym::sim {

struct SimulationResult {
  std::vector<FrameObservation> frames;
  std::vector<LabelGrid> grids;  // one per frame, left view at grid_scale
};

/// Runs the full synthetic sequence: samples surface points, tracks their
/// stereo observations frame to frame (a track dies when its point leaves
/// either view or gets occluded, and never resumes under the same id), adds
/// Gaussian pixel noise, and renders the per-frame label grids.
/// Deterministic for a fixed spec. Throws EmptyScene when nothing is ever
/// observed.
SimulationResult generate_sequence(const SceneSpec& spec);

/// Projects a world point into both rectified views. camera_pose maps camera
/// coordinates to world coordinates. Throws BehindCamera and OutOfImage.
std::pair<Eigen::Vector2d, Eigen::Vector2d> project_stereo(
    const StereoCamera& cam, const Pose& camera_pose, const Point3& p_world);

/// Analytic z-buffer over the wall box and the object solids at one frame,
/// rasterized at spec.grid_scale. Pixels hitting nothing closer than
/// far_plane get far_plane depth and label 0.
LabelGrid render_label_grid(const SceneSpec& spec, int frame);

}  // namespace dym::sim
