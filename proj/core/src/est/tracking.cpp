#include "dym/est/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dym/errors.hpp"
#include "dym/ransac.hpp"

namespace dym::est {
namespace {

constexpr int kMinFramePairs = 3;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

double bbox_volume(const std::vector<Correspondence3D>& pairs) {
  if (pairs.empty()) return 0.0;
  Eigen::Vector3d lo = pairs.front().p_curr;
  Eigen::Vector3d hi = lo;
  for (const Correspondence3D& pr : pairs) {
    lo = lo.cwiseMin(pr.p_curr);
    hi = hi.cwiseMax(pr.p_curr);
  }
  return (hi - lo).prod();
}

void coast_model(MotionModel& m, const CameraTrajectory& camera, int frame,
                 int coast_limit) {
  if (m.retired) return;
  ++m.coasting_frames;
  const Pose step = m.ego_increments.back();  // constant-velocity guess
  m.ego_increments.push_back(step);
  m.ego_cumulative.push_back(m.ego_cumulative.back() * step);
  m.global_trajectory.push_back(compose_global_object_pose(
      camera.poses.at(static_cast<std::size_t>(frame)), m.ego_cumulative.back(),
      m.t_init));
  m.inliers.emplace_back();
  if (m.coasting_frames >= coast_limit) m.retired = true;
}

}  // namespace

LabelWindow::LabelWindow(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("label window capacity must be positive");
}

void LabelWindow::push(const std::unordered_map<std::int64_t, int>& labels) {
  std::unordered_map<std::int64_t, int> kept;
  kept.reserve(labels.size());
  for (const auto& [track, label] : labels)
    if (label > 0) kept.emplace(track, label);
  entries_.push_back(std::move(kept));
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

void LabelWindow::erase_label(int label) {
  for (auto& entry : entries_)
    for (auto it = entry.begin(); it != entry.end();)
      it = (it->second == label) ? entry.erase(it) : std::next(it);
}

void LabelWindow::set_weight_scale(double scale) {
  if (!(scale > 0.0)) throw ConfigError("weight scale must be positive");
  weight_scale_ = scale;
}

std::unordered_map<std::int64_t, int> associate_labels(
    const LabelWindow& window,
    const std::unordered_map<std::int64_t, int>& candidates) {
  std::unordered_map<std::int64_t, int> out;
  out.reserve(candidates.size());
  for (const auto& [track, candidate] : candidates) {
    std::map<int, double> votes;
    int age = 0;
    for (auto it = window.entries().rbegin(); it != window.entries().rend();
         ++it, ++age) {
      const auto found = it->find(track);
      if (found != it->end()) votes[found->second] += window.weight(age);
    }
    if (votes.empty()) {
      out.emplace(track, candidate);
      continue;
    }
    int best_label = 0;
    double best_weight = -1.0;
    for (const auto& [label, weight] : votes) {  // ascending label order:
      if (weight > best_weight) {                // strict > keeps the smaller
        best_label = label;                      // label on exact ties
        best_weight = weight;
      }
    }
    out.emplace(track, best_label);
  }
  return out;
}

int identify_camera_model(const seg::MotionSegmentation& seg,
                          const std::vector<Correspondence3D>& pairs) {
  if (seg.models.empty())
    throw NoModelsFound("no motion models to identify the camera from");
  if (seg.labels.size() != pairs.size())
    throw LengthMismatch("segmentation labels do not match the pair count");

  int best_label = 0;
  std::size_t best_count = 0;
  double best_volume = -1.0;
  for (const seg::MotionModel& model : seg.models) {
    std::vector<Correspondence3D> members;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (seg.labels[i] == model.label) members.push_back(pairs[i]);
    const double volume = bbox_volume(members);
    const std::size_t count = model.inlier_track_ids.size();
    const bool better =
        best_label == 0 || count > best_count ||
        (count == best_count && volume > best_volume) ||
        (count == best_count && volume == best_volume && model.label < best_label);
    if (better) {
      best_label = model.label;
      best_count = count;
      best_volume = volume;
    }
  }
  return best_label;
}

void update_camera(CameraTrajectory& traj,
                   const std::vector<Correspondence3D>& frame_pairs,
                   double inlier_threshold, int max_iterations,
                   std::uint64_t seed) {
  if (traj.poses.empty()) {
    traj.poses.push_back(Pose::identity());
    traj.tracking_lost.push_back(0);
  }
  const Pose last = traj.poses.back();
  try {
    if (static_cast<int>(frame_pairs.size()) < kMinFramePairs)
      throw DegenerateGeometry("fewer than three static-scene pairs");
    const RansacResult fit =
        ransac_rigid(frame_pairs, inlier_threshold, max_iterations, seed);
    traj.poses.push_back(last * fit.pose.inverse());
    traj.tracking_lost.push_back(0);
  } catch (const DegenerateGeometry&) {
    traj.poses.push_back(last);
    traj.tracking_lost.push_back(1);
  }
}

Pose compute_t_init(const std::vector<Point3>& object_points,
                    const Pose& camera_pose_at_first_observation) {
  if (object_points.empty())
    throw DegenerateGeometry("gravity center of an empty point set");
  Point3 center = Point3::Zero();
  for (const Point3& p : object_points)
    center += camera_pose_at_first_observation.apply(p);
  center /= static_cast<double>(object_points.size());
  return Pose::translate(center);
}

Pose compose_global_object_pose(const Pose& camera_pose,
                                const Pose& ego_cumulative,
                                const Pose& t_init) {
  return camera_pose * ego_cumulative.inverse() * t_init.inverse();
}

void TrackerParams::validate() const {
  if (window_length < 1) throw ConfigError("window_length must be positive");
  if (coast_limit < 1) throw ConfigError("coast_limit must be positive");
  if (!(inlier_threshold > 0.0) || !std::isfinite(inlier_threshold))
    throw ConfigError("inlier_threshold must be positive and finite");
  if (ransac_iterations < 1)
    throw ConfigError("ransac_iterations must be positive");
  if (!(camera_takeover_ratio >= 1.0))
    throw ConfigError("camera_takeover_ratio must be at least 1");
  if (camera_takeover_frames < 1)
    throw ConfigError("camera_takeover_frames must be positive");
}

void update_object_models(
    std::vector<MotionModel>& models,
    const std::map<int, std::vector<Correspondence3D>>& pairs_by_label,
    int camera_label, const CameraTrajectory& camera, int frame,
    const TrackerParams& params) {
  if (static_cast<int>(camera.poses.size()) <= frame)
    throw LengthMismatch("camera trajectory does not cover the current frame");

  const auto find_model = [&models](int label) -> MotionModel* {
    for (MotionModel& m : models)
      if (m.label == label) return &m;
    return nullptr;
  };

  std::unordered_set<int> handled;
  for (const auto& [label, label_pairs] : pairs_by_label) {
    if (label <= 0 || label == camera_label) continue;
    MotionModel* existing = find_model(label);
    if (existing && existing->retired) {  // dead label, never resurrected
      handled.insert(label);
      continue;
    }
    const std::uint64_t seed =
        mix_seed(mix_seed(params.rng_seed, static_cast<std::uint64_t>(frame)),
                 static_cast<std::uint64_t>(label));

    if (!existing) {
      if (static_cast<int>(label_pairs.size()) < kMinFramePairs) {
        handled.insert(label);
        continue;  // too little data to establish a model; retry next frame
      }
      RansacResult fit;
      try {
        fit = ransac_rigid(label_pairs, params.inlier_threshold,
                           params.ransac_iterations, seed);
      } catch (const DegenerateGeometry&) {
        handled.insert(label);
        continue;
      }
      MotionModel m;
      m.label = label;
      m.birth_frame = frame - 1;  // where its points were first seen
      std::vector<Point3> first_points;
      std::vector<std::int64_t> ids;
      first_points.reserve(fit.inlier_indices.size());
      ids.reserve(fit.inlier_indices.size());
      for (std::size_t idx : fit.inlier_indices) {
        first_points.push_back(label_pairs[idx].p_prev);
        ids.push_back(label_pairs[idx].track_id);
      }
      std::sort(ids.begin(), ids.end());
      m.t_init = compute_t_init(
          first_points, camera.poses.at(static_cast<std::size_t>(m.birth_frame)));
      m.gravity_center = m.t_init.translation();
      m.counted_tracks.insert(ids.begin(), ids.end());
      const Pose increment = fit.pose.inverse();
      m.ego_increments = {Pose::identity(), increment};
      m.ego_cumulative = {Pose::identity(), increment};
      m.global_trajectory = {
          compose_global_object_pose(
              camera.poses.at(static_cast<std::size_t>(m.birth_frame)),
              Pose::identity(), m.t_init),
          compose_global_object_pose(
              camera.poses.at(static_cast<std::size_t>(frame)), increment,
              m.t_init)};
      m.inliers = {ids, ids};
      models.push_back(std::move(m));
      handled.insert(label);
      continue;
    }

    if (static_cast<int>(label_pairs.size()) < kMinFramePairs) {
      coast_model(*existing, camera, frame, params.coast_limit);
      handled.insert(label);
      continue;
    }
    RansacResult fit;
    try {
      fit = ransac_rigid(label_pairs, params.inlier_threshold,
                         params.ransac_iterations, seed);
    } catch (const DegenerateGeometry&) {
      coast_model(*existing, camera, frame, params.coast_limit);
      handled.insert(label);
      continue;
    }
    const Pose increment = fit.pose.inverse();
    existing->ego_increments.push_back(increment);
    existing->ego_cumulative.push_back(existing->ego_cumulative.back() *
                                       increment);
    existing->global_trajectory.push_back(compose_global_object_pose(
        camera.poses.at(static_cast<std::size_t>(frame)),
        existing->ego_cumulative.back(), existing->t_init));
    std::vector<std::int64_t> ids;
    ids.reserve(fit.inlier_indices.size());
    for (std::size_t idx : fit.inlier_indices)
      ids.push_back(label_pairs[idx].track_id);
    std::sort(ids.begin(), ids.end());
    existing->inliers.push_back(ids);
    existing->coasting_frames = 0;

    // Running gravity-center mean: every distinct track contributes the
    // position it had at the model's birth epoch, recovered by undoing the
    // accumulated egocentric motion.
    const Pose to_birth_epoch =
        camera.poses.at(static_cast<std::size_t>(existing->birth_frame)) *
        existing->ego_cumulative.back();
    for (std::size_t idx : fit.inlier_indices) {
      const Correspondence3D& pr = label_pairs[idx];
      if (existing->counted_tracks.insert(pr.track_id).second) {
        const double n = static_cast<double>(existing->counted_tracks.size());
        existing->gravity_center +=
            (to_birth_epoch.apply(pr.p_curr) - existing->gravity_center) / n;
      }
    }
    handled.insert(label);
  }

  // Labels that produced no usable pairs this frame coast.
  for (MotionModel& m : models) {
    if (m.retired || m.label == camera_label) continue;
    if (handled.count(m.label)) continue;
    coast_model(m, camera, frame, params.coast_limit);
  }
}

MotionTracker::MotionTracker(TrackerParams params)
    : params_(params), window_(params.window_length) {
  params_.validate();
  camera_.poses.push_back(Pose::identity());
  camera_.tracking_lost.push_back(0);
}

void MotionTracker::choose_camera_label(
    const std::map<int, std::vector<Correspondence3D>>& by_label) {
  if (by_label.empty()) {
    takeover_candidate_ = 0;
    takeover_streak_ = 0;
    return;
  }
  if (camera_label_ == 0) {
    // First frame with data: most tracks, ties by larger spatial extent,
    // then by smaller label (map order makes strict-greater do that).
    int best = 0;
    std::size_t best_count = 0;
    double best_volume = -1.0;
    for (const auto& [label, label_pairs] : by_label) {
      const double volume = bbox_volume(label_pairs);
      if (best == 0 || label_pairs.size() > best_count ||
          (label_pairs.size() == best_count && volume > best_volume)) {
        best = label;
        best_count = label_pairs.size();
        best_volume = volume;
      }
    }
    camera_label_ = best;
    return;
  }

  std::size_t camera_count = 0;
  if (const auto it = by_label.find(camera_label_); it != by_label.end())
    camera_count = it->second.size();
  int challenger = 0;
  std::size_t challenger_count = 0;
  for (const auto& [label, label_pairs] : by_label)
    if (label != camera_label_ && label_pairs.size() > challenger_count) {
      challenger = label;
      challenger_count = label_pairs.size();
    }
  const bool dominates =
      challenger != 0 && static_cast<double>(challenger_count) >
                             params_.camera_takeover_ratio *
                                 static_cast<double>(camera_count);
  if (!dominates) {
    takeover_candidate_ = 0;
    takeover_streak_ = 0;
    return;
  }
  if (takeover_candidate_ == challenger) {
    ++takeover_streak_;
  } else {
    takeover_candidate_ = challenger;
    takeover_streak_ = 1;
  }
  if (takeover_streak_ >= params_.camera_takeover_frames) {
    camera_label_ = challenger;
    takeover_candidate_ = 0;
    takeover_streak_ = 0;
    // The challenger's object model folds into the camera.
    for (MotionModel& m : models_)
      if (m.label == camera_label_) m.retired = true;
  }
}

std::unordered_map<std::int64_t, int> MotionTracker::process_frame(
    const std::vector<Correspondence3D>& pairs,
    const seg::MotionSegmentation& seg) {
  if (seg.labels.size() != pairs.size())
    throw LengthMismatch("segmentation labels do not match the pair count");
  const int frame = next_frame_++;

  // Group the frame-local segmentation into clusters.
  std::map<int, std::vector<int>> local;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (seg.labels[i] > 0) local[seg.labels[i]].push_back(static_cast<int>(i));

  const auto add_votes = [this](std::int64_t track,
                                std::map<int, double>& into) {
    int age = 0;
    for (auto it = window_.entries().rbegin(); it != window_.entries().rend();
         ++it, ++age) {
      const auto found = it->find(track);
      if (found != it->end()) into[found->second] += window_.weight(age);
    }
  };

  // Each cluster adopts the persistent label its members collectively voted
  // for; clusters nobody remembers start a fresh one.
  std::unordered_map<std::int64_t, int> candidates;
  candidates.reserve(pairs.size());
  for (const auto& [local_label, members] : local) {
    std::map<int, double> aggregate;
    for (int i : members) add_votes(pairs[i].track_id, aggregate);
    int persistent = 0;
    if (aggregate.empty()) {
      persistent = next_label_++;
    } else {
      double best_weight = -1.0;
      for (const auto& [label, weight] : aggregate)
        if (weight > best_weight) {
          persistent = label;
          best_weight = weight;
        }
    }
    for (int i : members) candidates[pairs[i].track_id] = persistent;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (seg.labels[i] <= 0) candidates.emplace(pairs[i].track_id, 0);

  // Individual tracks with their own history may override the cluster vote.
  auto assigned = associate_labels(window_, candidates);

  std::map<int, std::vector<Correspondence3D>> by_label;
  for (const Correspondence3D& pr : pairs) {
    const int label = assigned.at(pr.track_id);
    if (label > 0) by_label[label].push_back(pr);
  }

  choose_camera_label(by_label);

  const std::vector<Correspondence3D> no_pairs;
  const auto camera_it = by_label.find(camera_label_);
  update_camera(camera_,
                camera_it == by_label.end() ? no_pairs : camera_it->second,
                params_.inlier_threshold, params_.ransac_iterations,
                mix_seed(mix_seed(params_.rng_seed,
                                  static_cast<std::uint64_t>(frame)),
                         0));

  update_object_models(models_, by_label, camera_label_, camera_, frame,
                       params_);

  // Retired labels must not vote any more, or they would resurrect. The
  // camera label is exempt: after a takeover it lives on as the camera.
  for (const MotionModel& m : models_)
    if (m.retired && m.label != camera_label_) window_.erase_label(m.label);

  window_.push(assigned);
  return assigned;
}

}  // namespace dym::est
