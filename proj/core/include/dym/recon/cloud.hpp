#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "dym/errors.hpp"
#include "dym/geometry.hpp"
#include "dym/label_grid.hpp"
#include "dym/mask/labeling.hpp"
#include "dym/stereo_camera.hpp"

namespace dym::recon {

/// Which frame a cloud's coordinates live in. Merging clouds with different
/// tags is a programming error, caught where clouds meet.
enum class FrameTag { kGlobal, kObjectEgocentric };

struct PointCloud {
  FrameTag frame = FrameTag::kGlobal;
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;  // channels in [0,1]

  std::size_t size() const { return points.size(); }
};

/// Point cloud fused on a voxel grid: at most one retained point per
/// occupied voxel. The first point to claim a voxel keeps its position;
/// later arrivals only fold their color into a running average.
class VoxelCloud {
 public:
  /// Throws ConfigError when voxel_edge is not positive.
  VoxelCloud(double voxel_edge, FrameTag tag);

  /// Returns true when the point claimed a new voxel. Non-finite
  /// coordinates throw ConfigError.
  bool insert(const Eigen::Vector3d& point, const Eigen::Vector3d& color);

  /// Re-expresses every retained point through a rigid transform and
  /// re-keys the voxel index. Voxels that collapse together keep the
  /// earliest point and hit-weighted average color.
  void rigid_transform(const Pose& t);

  const PointCloud& cloud() const { return cloud_; }
  double voxel_edge() const { return edge_; }
  std::size_t size() const { return cloud_.size(); }

 private:
  struct Key {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t z = 0;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };

  Key key_of(const Eigen::Vector3d& p) const;

  double edge_;
  PointCloud cloud_;
  std::vector<long> hits_;  // color sample count per retained point
  std::unordered_map<Key, std::size_t, KeyHash> index_;
};

/// Accumulated 3D model of one moving object, kept in a rolling egocentric
/// frame: after each stitch the cloud is expressed in the camera frame of
/// the most recent contributing frame.
struct ObjectModel {
  int label = 0;
  VoxelCloud cloud{0.02, FrameTag::kObjectEgocentric};
  /// Mean of the retained points, recomputed at every stitch.
  Eigen::Vector3d gravity_center = Eigen::Vector3d::Zero();
};

/// Default fusion resolutions, exposed through the pipeline config.
inline constexpr double kObjectVoxelEdge = 0.02;  // meters
inline constexpr double kStaticVoxelEdge = 0.05;

/// Folds one frame's static pixels into the global map.
///
/// Every pixel labeled 0 whose depth is below max_depth is back-projected
/// through `cam` (the rig at the grid's resolution), moved to the global
/// frame by camera_pose, and inserted. Object-labeled pixels never reach
/// the map. Throws DimensionMismatch when grid, labels, and cam disagree
/// on size, and ConfigError when the map is not a global-frame cloud.
void accumulate_static_map(VoxelCloud& map, const LabelGrid& grid,
                           const mask::LabelMask& labels,
                           const Pose& camera_pose, const StereoCamera& cam,
                           double max_depth);

/// Folds one frame's object-labeled points (camera-frame coordinates) into
/// the model.
///
/// The existing cloud is first re-expressed through the frame's ego
/// increment so old and new points share the current camera frame, then
/// the new points are merged under voxel deduplication and the gravity
/// center is recomputed. Call with no points (and the coasted increment)
/// for frames where the object was not observed, so the rolling frame
/// stays synchronized. Throws LengthMismatch when points and colors
/// differ in size.
void stitch_object_model(ObjectModel& model,
                         const std::vector<Eigen::Vector3d>& points_camera,
                         const std::vector<Eigen::Vector3d>& colors,
                         const Pose& ego_increment);

}  // namespace dym::recon
