#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dym/correspondence.hpp"
#include "dym/geometry.hpp"
#include "dym/seg/segmentation.hpp"

namespace dym::est {

/// Rolling history of per-track labels over the last few processed frames.
/// New frames are pushed at the back; entries beyond the capacity fall off
/// the front. A vote from an entry of age a (0 = newest) carries weight
/// (capacity - a) * weight_scale, so recent frames dominate but the decision
/// is invariant to the scale.
class LabelWindow {
 public:
  explicit LabelWindow(int capacity = 4);

  /// Records one frame of track -> label assignments. Non-positive labels
  /// mark unlabeled tracks and are dropped.
  void push(const std::unordered_map<std::int64_t, int>& labels);

  /// Deletes every stored vote for `label`, e.g. once its model is retired.
  void erase_label(int label);

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(entries_.size()); }
  double weight(int age) const { return (capacity_ - age) * weight_scale_; }
  void set_weight_scale(double scale);  // throws ConfigError unless > 0

  /// Oldest entry first, newest last.
  const std::deque<std::unordered_map<std::int64_t, int>>& entries() const {
    return entries_;
  }

 private:
  int capacity_;
  double weight_scale_ = 1.0;
  std::deque<std::unordered_map<std::int64_t, int>> entries_;
};

/// Per-track temporal label smoothing. Each track in `candidates` receives
/// the label with the largest summed window weight over the frames where the
/// track carried it; ties go to the smaller label id. Tracks with no window
/// history keep their candidate label.
std::unordered_map<std::int64_t, int> associate_labels(
    const LabelWindow& window,
    const std::unordered_map<std::int64_t, int>& candidates);

/// Camera poses per frame, each mapping camera coordinates of that frame
/// into the global frame (the camera frame of frame 0). poses[0] is the
/// identity; tracking_lost[t] flags frames where the increment could not be
/// estimated and the previous pose was held.
struct CameraTrajectory {
  std::vector<Pose> poses;
  std::vector<std::uint8_t> tracking_lost;
};

/// Picks the label that represents the static scene: most inlier tracks,
/// ties by larger axis-aligned bounding-box volume of the labeled points,
/// then by smaller label id. Throws NoModelsFound on an empty segmentation.
int identify_camera_model(const seg::MotionSegmentation& seg,
                          const std::vector<Correspondence3D>& pairs);

/// Appends the pose for the next frame from the static-scene pairs of that
/// frame: the camera moves by the inverse of the apparent point motion.
/// Starts the trajectory with an identity anchor when empty. Fewer than
/// three pairs or degenerate geometry hold the previous pose and set the
/// tracking_lost flag instead of throwing.
void update_camera(CameraTrajectory& traj,
                   const std::vector<Correspondence3D>& frame_pairs,
                   double inlier_threshold, int max_iterations,
                   std::uint64_t seed);

/// Pure translation to the gravity center of a freshly observed point set,
/// expressed in the global frame: the points (given in the camera frame of
/// their first observation) are mapped through that camera pose and
/// averaged. Throws DegenerateGeometry on an empty set.
Pose compute_t_init(const std::vector<Point3>& object_points,
                    const Pose& camera_pose_at_first_observation);

/// Global object pose from the camera pose of the frame, the cumulative
/// egocentric object pose, and the object's initial transform:
/// camera_pose * ego_cumulative^-1 * t_init^-1.
Pose compose_global_object_pose(const Pose& camera_pose,
                                const Pose& ego_cumulative,
                                const Pose& t_init);

/// A persistently tracked rigid motion model. All trajectories hold one
/// pose per frame since birth_frame (the frame where the points were first
/// seen); index k corresponds to frame birth_frame + k.
struct MotionModel {
  int label = 0;
  int birth_frame = 0;
  Pose t_init;  // fixed at birth
  Point3 gravity_center = Point3::Zero();  // running mean, global frame

  std::vector<Pose> ego_increments;    // [0] is the identity
  std::vector<Pose> ego_cumulative;    // ordered composition of increments
  std::vector<Pose> global_trajectory;
  std::vector<std::vector<std::int64_t>> inliers;  // sorted ids per frame

  int coasting_frames = 0;  // consecutive frames without a usable fit
  bool retired = false;

  std::unordered_set<std::int64_t> counted_tracks;  // gravity-center bookkeeping

  bool covers(int frame) const {
    return frame >= birth_frame &&
           frame < birth_frame + static_cast<int>(global_trajectory.size());
  }
  const Pose& global_at(int frame) const {
    return global_trajectory.at(static_cast<std::size_t>(frame - birth_frame));
  }
  int last_frame() const {
    return birth_frame + static_cast<int>(global_trajectory.size()) - 1;
  }
};

struct TrackerParams {
  int window_length = 4;
  int coast_limit = 10;  // coasting frames before a model is retired
  double inlier_threshold = 0.05;  // meters, for the per-frame rigid fits
  int ransac_iterations = 500;
  std::uint64_t rng_seed = 0;
  double camera_takeover_ratio = 2.0;  // challenger must exceed this multiple
  int camera_takeover_frames = 5;      // for this many consecutive frames

  void validate() const;  // throws ConfigError
};

/// Advances every object model by one frame. `pairs_by_label` holds the
/// current frame's correspondences grouped by persistent label; the entry
/// for camera_label is ignored (the camera is handled separately). Labels
/// with an existing model get a robust rigid increment, an updated
/// cumulative/global pose, and a gravity-center refresh over newly seen
/// tracks. Unknown labels with at least three pairs spawn a new model
/// anchored at the previous frame. Models without a usable fit this frame
/// coast on their last increment and are retired once they have coasted
/// coast_limit frames in a row.
void update_object_models(
    std::vector<MotionModel>& models,
    const std::map<int, std::vector<Correspondence3D>>& pairs_by_label,
    int camera_label, const CameraTrajectory& camera, int frame,
    const TrackerParams& params);

/// Frame-by-frame orchestration: translates per-frame segmentation labels
/// into persistent labels through the sliding window, keeps the camera
/// assignment sticky, and maintains the camera trajectory plus one
/// MotionModel per moving object.
class MotionTracker {
 public:
  explicit MotionTracker(TrackerParams params = {});

  /// Processes the correspondences between the previous and current frame
  /// (frame index = number of calls so far, starting at 1). `seg` supplies
  /// the per-pair labels from the current frame's segmentation; its model
  /// list is not consulted. Returns the persistent label assigned to each
  /// track (0 = unlabeled).
  std::unordered_map<std::int64_t, int> process_frame(
      const std::vector<Correspondence3D>& pairs,
      const seg::MotionSegmentation& seg);

  const CameraTrajectory& camera() const { return camera_; }
  const std::vector<MotionModel>& models() const { return models_; }
  int camera_label() const { return camera_label_; }
  /// Index of the next frame to be processed; frame 0 is the anchor.
  int next_frame() const { return next_frame_; }
  const TrackerParams& params() const { return params_; }

 private:
  void choose_camera_label(
      const std::map<int, std::vector<Correspondence3D>>& by_label);

  TrackerParams params_;
  LabelWindow window_;
  CameraTrajectory camera_;
  std::vector<MotionModel> models_;
  int camera_label_ = 0;
  int next_label_ = 1;
  int next_frame_ = 1;
  int takeover_candidate_ = 0;
  int takeover_streak_ = 0;
};

}  // namespace dym::est
