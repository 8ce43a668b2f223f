#include "dym/pipeline/stages.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dym/correspondence.hpp"
#include "dym/est/tracking.hpp"
#include "dym/eval/metrics.hpp"
#include "dym/io/formats.hpp"
#include "dym/mask/labeling.hpp"
#include "dym/recon/cloud.hpp"
#include "dym/recon/export.hpp"
#include "dym/seg/segmentation.hpp"

namespace dym::pipeline {

namespace fs = std::filesystem;

ErrorCategory classify_error(const Error& e) {
  if (const auto* p = dynamic_cast<const PipelineError*>(&e)) {
    return p->category();
  }
  if (dynamic_cast<const ConfigError*>(&e)) return ErrorCategory::kConfig;
  if (dynamic_cast<const DegenerateGeometry*>(&e) ||
      dynamic_cast<const NonPositiveDisparity*>(&e) ||
      dynamic_cast<const EpipolarViolation*>(&e) ||
      dynamic_cast<const BehindCamera*>(&e) ||
      dynamic_cast<const OutOfImage*>(&e) ||
      dynamic_cast<const InsufficientHypotheses*>(&e) ||
      dynamic_cast<const NoModelsFound*>(&e) ||
      dynamic_cast<const NonPositiveDepth*>(&e)) {
    return ErrorCategory::kNumeric;
  }
  return ErrorCategory::kData;
}

namespace {

/// Depth beyond which refit weights stop shrinking (meters).
constexpr double kWeightDepthCap = 5.0;

/// Runs fn, rewrapping library errors with the stage name and frame so a
/// failed batch run points at the exact spot. Already-wrapped errors pass
/// through untouched.
template <typename Fn>
decltype(auto) guarded(const char* stage, int frame, Fn&& fn) {
  try {
    return std::forward<Fn>(fn)();
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    std::string where = std::string("stage '") + stage + "'";
    if (frame >= 0) where += ", frame " + std::to_string(frame);
    throw PipelineError(classify_error(e), where + ": " + e.what());
  }
}

std::string frame_txt(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.txt", frame);
  return buf;
}

std::string mask_pgm(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mask_%06d.pgm", frame);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoFailure("cannot create directory '" + dir.string() +
                    "': " + ec.message());
  }
}

/// Triangulated consecutive-frame correspondences for tracks seen in both
/// frames, in the current frame's file order.
std::vector<Correspondence3D> make_pairs(const StereoCamera& cam,
                                         const FrameFeatures& prev,
                                         const FrameFeatures& curr) {
  std::unordered_map<std::int64_t, const StereoFeature*> by_id;
  by_id.reserve(prev.size());
  for (const auto& f : prev) by_id.emplace(f.track_id, &f);

  std::vector<Correspondence3D> pairs;
  pairs.reserve(curr.size());
  for (const auto& f : curr) {
    auto it = by_id.find(f.track_id);
    if (it == by_id.end()) continue;
    const StereoFeature& p = *it->second;
    Correspondence3D c;
    c.track_id = f.track_id;
    c.p_prev = cam.triangulate({p.ul, p.vl}, {p.ur, p.vr});
    c.p_curr = cam.triangulate({f.ul, f.vl}, {f.ur, f.vr});
    // Stereo depth noise grows like z^2, so weight refits by the inverse
    // of the summed endpoint variances. Near points then anchor the fit
    // instead of being drowned out by far, noisy ones. The cap keeps the
    // dynamic range bounded: far points still contribute their lateral
    // information to the rotation instead of vanishing entirely.
    const double zp = std::min(c.p_prev.z(), kWeightDepthCap);
    const double zc = std::min(c.p_curr.z(), kWeightDepthCap);
    c.weight = 1.0 / (std::pow(zp, 4) + std::pow(zc, 4));
    pairs.push_back(c);
  }
  return pairs;
}

/// Decorrelates the per-frame RANSAC streams while keeping runs with the
/// same base seed bit-reproducible.
std::uint64_t frame_seed(std::uint64_t base, int frame) {
  return base ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(frame));
}

int parse_int_field(const fs::path& file, const std::string& key,
                    const std::string& value) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(value, &used);
  } catch (const std::exception&) {
    throw ParseError(file.string(), 0, "bad value for key '" + key + "'");
  }
  if (used != value.size()) {
    throw ParseError(file.string(), 0, "bad value for key '" + key + "'");
  }
  return v;
}

std::string format_compact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// One tracked object as materialized by the tracking stage.
struct ObjectRecord {
  int label = 0;
  int birth_frame = 0;
  Eigen::Vector3d t_init = Eigen::Vector3d::Zero();
  std::vector<int> observed;     // frames with a real (non-coasted) fit
  io::TrajectoryFile trajectory;  // poses[k] is frame birth_frame + k

  bool covers(int frame) const {
    return frame >= birth_frame &&
           frame < birth_frame + static_cast<int>(trajectory.poses.size());
  }
  const Pose& global_at(int frame) const {
    return trajectory.poses[static_cast<std::size_t>(frame - birth_frame)];
  }
};

std::vector<ObjectRecord> read_tracked_objects(const fs::path& track_dir) {
  const fs::path index = track_dir / "objects.txt";
  const auto sections = io::read_key_value_file(index);
  auto top = sections.find("");
  if (top == sections.end()) {
    throw ParseError(index.string(), 0, "empty object index");
  }
  const auto& kv = top->second;
  auto lookup = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw ParseError(index.string(), 0, "missing key '" + key + "'");
    }
    return it->second;
  };

  std::vector<ObjectRecord> records;
  std::istringstream labels(lookup("labels"));
  int label = 0;
  while (labels >> label) {
    ObjectRecord rec;
    rec.label = label;
    const std::string prefix = "object_" + std::to_string(label) + "_";
    rec.birth_frame =
        parse_int_field(index, prefix + "birth_frame", lookup(prefix + "birth_frame"));
    {
      std::istringstream t(lookup(prefix + "t_init"));
      if (!(t >> rec.t_init.x() >> rec.t_init.y() >> rec.t_init.z())) {
        throw ParseError(index.string(), 0, "bad value for key '" + prefix +
                                                "t_init'");
      }
    }
    {
      std::istringstream o(lookup(prefix + "observed"));
      int f = 0;
      while (o >> f) rec.observed.push_back(f);
    }
    rec.trajectory = io::read_trajectory(
        track_dir / ("trajectory_object_" + std::to_string(label) + ".txt"));
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

void simulate_stage(const sim::SceneSpec& spec, const fs::path& seq_dir) {
  guarded("simulate", -1, [&] {
    spec.validate();
    const sim::SimulationResult result = sim::generate_sequence(spec);
    write_sequence(seq_dir, spec, result);
  });
}

void segment_stage(const fs::path& seq_dir, const PipelineConfig& cfg,
                   const fs::path& out_dir) {
  const SequenceData seq = guarded("segment", -1, [&] {
    cfg.validate();
    return read_sequence(seq_dir, /*with_grids=*/false);
  });
  guarded("segment", -1, [&] { ensure_dir(out_dir); });

  for (int f = 1; f < seq.frame_count; ++f) {
    guarded("segment", f, [&] {
      auto pairs = make_pairs(seq.camera,
                              seq.frames[static_cast<std::size_t>(f - 1)],
                              seq.frames[static_cast<std::size_t>(f)]);
      // Far points carry depth noise far above any plausible inlier gate;
      // they stay unlabeled, which downstream reads as static.
      std::erase_if(pairs, [&](const Correspondence3D& c) {
        return c.p_prev.z() > cfg.segmentation_max_depth ||
               c.p_curr.z() > cfg.segmentation_max_depth;
      });
      seg::SegmentationParams params = cfg.segmentation;
      params.rng_seed = frame_seed(cfg.segmentation.rng_seed, f);
      const seg::MotionSegmentation segmentation =
          seg::segment_motions(pairs, params);

      std::map<std::int64_t, int> labels;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        labels[pairs[i].track_id] = segmentation.labels[i];
      }
      write_track_labels(out_dir / frame_txt(f), labels);
    });
  }
}

void track_stage(const fs::path& seq_dir, const fs::path& seg_dir,
                 const PipelineConfig& cfg, const fs::path& out_dir) {
  const SequenceData seq = guarded("track", -1, [&] {
    cfg.validate();
    return read_sequence(seq_dir, /*with_grids=*/false);
  });
  guarded("track", -1, [&] { ensure_dir(out_dir / "labels"); });

  est::MotionTracker tracker(cfg.tracker);
  for (int f = 1; f < seq.frame_count; ++f) {
    guarded("track", f, [&] {
      const auto pairs = make_pairs(seq.camera,
                                    seq.frames[static_cast<std::size_t>(f - 1)],
                                    seq.frames[static_cast<std::size_t>(f)]);
      const auto raw = read_track_labels(seg_dir / frame_txt(f));
      seg::MotionSegmentation segmentation;
      segmentation.labels.resize(pairs.size(), 0);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto it = raw.find(pairs[i].track_id);
        if (it != raw.end()) segmentation.labels[i] = it->second;
      }

      const auto persistent = tracker.process_frame(pairs, segmentation);

      // Persistent object labels start at 1, so 0 is free to mean "static"
      // in the files regardless of which label the camera holds right now.
      std::map<std::int64_t, int> out_labels;
      const int camera_label = tracker.camera_label();
      for (const auto& [id, label] : persistent) {
        out_labels[id] = (label == camera_label) ? 0 : label;
      }
      write_track_labels(out_dir / "labels" / frame_txt(f), out_labels);
    });
  }

  guarded("track", -1, [&] {
    std::vector<double> timestamps(
        static_cast<std::size_t>(seq.frame_count));
    std::iota(timestamps.begin(), timestamps.end(), 0.0);
    io::write_trajectory(out_dir / "trajectory_camera.txt", timestamps,
                         tracker.camera().poses);

    // Retired models were junk or long gone; models that never outlived
    // their birth pair carry no usable trajectory. A model the run end cut
    // off before it could either retire or accumulate a window's worth of
    // observations is a transient cluster, not an object. Everything else
    // is kept, trailing coasted poses included (they are the best
    // available guess).
    const auto observed_frames = [](const est::MotionModel& m) {
      std::size_t n = 0;
      for (const auto& in : m.inliers)
        if (!in.empty()) ++n;
      return n;
    };
    std::string labels_value;
    io::KeyValues kv;
    for (const auto& m : tracker.models()) {
      if (m.retired || m.global_trajectory.size() < 2) continue;
      if (observed_frames(m) <
          static_cast<std::size_t>(tracker.params().window_length))
        continue;
      if (!labels_value.empty()) labels_value += " ";
      labels_value += std::to_string(m.label);

      const std::string prefix = "object_" + std::to_string(m.label) + "_";
      kv.emplace_back(prefix + "birth_frame", std::to_string(m.birth_frame));
      {
        char buf[128];
        const auto& t = m.t_init.translation();
        std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f", t.x(), t.y(), t.z());
        kv.emplace_back(prefix + "t_init", buf);
      }
      {
        std::string observed;
        for (std::size_t k = 0; k < m.inliers.size(); ++k) {
          if (m.inliers[k].empty()) continue;
          if (!observed.empty()) observed += " ";
          observed += std::to_string(m.birth_frame + static_cast<int>(k));
        }
        kv.emplace_back(prefix + "observed", observed);
      }

      std::vector<double> object_times(m.global_trajectory.size());
      std::iota(object_times.begin(), object_times.end(),
                static_cast<double>(m.birth_frame));
      io::write_trajectory(
          out_dir / ("trajectory_object_" + std::to_string(m.label) + ".txt"),
          object_times, m.global_trajectory);
    }
    kv.insert(kv.begin(), {"labels", labels_value});
    io::write_key_value_file(out_dir / "objects.txt", kv,
                             "tracked object index");
  });
}

namespace {

/// Reconstruction-time state for one tracked object: the pose bookkeeping
/// recovered from the trajectory files plus the growing egocentric cloud.
struct ObjectState {
  ObjectRecord rec;
  std::vector<Pose> ego_cumulative;  // [k] for frame birth + k
  std::vector<Pose> increments;      // [0] is the identity
  recon::ObjectModel model;
};

}  // namespace

void reconstruct_stage(const fs::path& seq_dir, const fs::path& track_dir,
                       const PipelineConfig& cfg, const fs::path& out_dir) {
  const SequenceData seq = guarded("reconstruct", -1, [&] {
    cfg.validate();
    return read_sequence(seq_dir, /*with_grids=*/true);
  });

  io::TrajectoryFile camera;
  std::vector<ObjectState> objects;
  guarded("reconstruct", -1, [&] {
    camera = io::read_trajectory(track_dir / "trajectory_camera.txt");
    if (static_cast<int>(camera.poses.size()) != seq.frame_count) {
      throw DimensionMismatch(
          "estimated camera trajectory length does not match the sequence");
    }
    for (ObjectRecord& rec : read_tracked_objects(track_dir)) {
      const int len = static_cast<int>(rec.trajectory.poses.size());
      if (rec.birth_frame < 0 || rec.birth_frame + len > seq.frame_count) {
        throw DimensionMismatch("object " + std::to_string(rec.label) +
                                " trajectory falls outside the sequence");
      }
      ObjectState state;
      state.model.label = rec.label;
      state.model.cloud = recon::VoxelCloud(
          cfg.reconstruction.object_voxel_edge,
          recon::FrameTag::kObjectEgocentric);

      // The egocentric accumulation frame is recovered from what the
      // tracking stage materialized: with G the object's global pose, C
      // the camera pose, and A the birth anchor, the cumulative egomotion
      // at frame birth+k is A^-1 * G_k^-1 * C_k (identity at k = 0).
      const Pose anchor_inv = Pose::translate(rec.t_init).inverse();
      state.ego_cumulative.reserve(static_cast<std::size_t>(len));
      state.increments.reserve(static_cast<std::size_t>(len));
      for (int k = 0; k < len; ++k) {
        const Pose& g = rec.trajectory.poses[static_cast<std::size_t>(k)];
        const Pose& c =
            camera.poses[static_cast<std::size_t>(rec.birth_frame + k)];
        state.ego_cumulative.push_back(anchor_inv * g.inverse() * c);
        state.increments.push_back(
            k == 0 ? Pose::identity()
                   : state.ego_cumulative[static_cast<std::size_t>(k - 1)]
                             .inverse() *
                         state.ego_cumulative[static_cast<std::size_t>(k)]);
      }
      state.rec = std::move(rec);
      objects.push_back(std::move(state));
    }
    ensure_dir(out_dir / "masks");
    ensure_dir(out_dir / "masks_voted");
  });

  recon::VoxelCloud static_map(cfg.reconstruction.static_voxel_edge,
                               recon::FrameTag::kGlobal);
  const StereoCamera grid_cam = seq.camera.scaled(seq.grid_scale);

  for (int f = 1; f < seq.frame_count; ++f) {
    guarded("reconstruct", f, [&] {
      const LabelGrid& grid = seq.grids[static_cast<std::size_t>(f)];
      const Pose& camera_pose = camera.poses[static_cast<std::size_t>(f)];

      // Advance every covered object's rolling frame to this frame first;
      // afterwards their clouds live in the current camera frame, so the
      // projection below uses the camera pose for the model pose and new
      // points merge with the identity increment.
      for (ObjectState& obj : objects) {
        if (!obj.rec.covers(f) || f == obj.rec.birth_frame) continue;
        recon::stitch_object_model(
            obj.model, {}, {},
            obj.increments[static_cast<std::size_t>(f - obj.rec.birth_frame)]);
      }

      const auto track_labels =
          read_track_labels(track_dir / "labels" / frame_txt(f));
      std::vector<mask::LabeledFeature> features;
      features.reserve(seq.frames[static_cast<std::size_t>(f)].size());
      for (const StereoFeature& sf : seq.frames[static_cast<std::size_t>(f)]) {
        mask::LabeledFeature lf;
        lf.pixel = {sf.ul * seq.grid_scale, sf.vl * seq.grid_scale};
        auto it = track_labels.find(sf.track_id);
        lf.label = (it == track_labels.end()) ? 0 : it->second;
        features.push_back(lf);
      }

      const mask::SuperpixelGrid sp =
          mask::compute_superpixels(grid, cfg.densify);
      const std::vector<int> voted =
          mask::vote_superpixel_labels(sp, features, cfg.densify);

      std::map<int, mask::BinaryMask> projected;
      for (ObjectState& obj : objects) {
        if (!obj.rec.covers(f) || obj.model.cloud.size() == 0) continue;
        projected[obj.rec.label] = mask::project_model_mask(
            obj.model.cloud.cloud().points, camera_pose, camera_pose,
            grid_cam, cfg.reconstruction.mask_splat_radius_px);
      }
      const std::vector<int> refined = mask::refine_with_projected_mask(
          sp, voted, projected, cfg.densify.overlap_threshold);

      const mask::LabelMask voted_mask = mask::expand_to_mask(sp, voted);
      const mask::LabelMask final_mask = mask::expand_to_mask(sp, refined);
      write_label_mask(out_dir / "masks_voted" / mask_pgm(f), voted_mask);
      write_label_mask(out_dir / "masks" / mask_pgm(f), final_mask);

      recon::accumulate_static_map(static_map, grid, final_mask, camera_pose,
                                   grid_cam, seq.far_plane);

      for (ObjectState& obj : objects) {
        if (!obj.rec.covers(f)) continue;
        std::vector<Eigen::Vector3d> points;
        std::vector<Eigen::Vector3d> colors;
        for (int y = 0; y < grid.height; ++y) {
          for (int x = 0; x < grid.width; ++x) {
            const std::size_t i = grid.index(x, y);
            if (final_mask.labels[i] != obj.rec.label) continue;
            const double z = grid.depth[i];
            if (!(z > 0.0) || z >= seq.far_plane) continue;
            points.push_back(grid_cam.back_project(
                {static_cast<double>(x), static_cast<double>(y)}, z));
            colors.push_back(grid.color[i]);
          }
        }
        recon::stitch_object_model(obj.model, points, colors,
                                   Pose::identity());
      }
    });
  }

  guarded("reconstruct", -1, [&] {
    recon::SceneExport scene;
    scene.frame_count = seq.frame_count;
    scene.camera_poses = camera.poses;
    scene.static_map = static_map.cloud();
    for (const ObjectState& obj : objects) {
      if (obj.model.cloud.size() == 0) continue;
      recon::VoxelCloud anchored = obj.model.cloud;
      anchored.rigid_transform(Pose::translate(obj.rec.t_init) *
                               obj.ego_cumulative.back());
      recon::ExportObject eo;
      eo.label = obj.rec.label;
      eo.birth_frame = obj.rec.birth_frame;
      eo.cloud = anchored.cloud();
      eo.poses = obj.rec.trajectory.poses;
      scene.objects.push_back(std::move(eo));
    }
    recon::export_scene(scene, out_dir / "scene");
  });
}

std::map<std::string, std::string> evaluate_stage(
    const fs::path& est_root, const fs::path& seq_dir,
    const fs::path& metrics_csv) {
  const fs::path track_dir = est_root / "tracking";
  const fs::path recon_dir = est_root / "reconstruction";

  const SequenceData seq = guarded("evaluate", -1, [&] {
    return read_sequence(seq_dir, /*with_grids=*/true);
  });

  std::vector<eval::MetricRow> rows;
  std::map<std::string, std::string> summary;
  summary["frame_count"] = std::to_string(seq.frame_count);

  std::vector<ObjectRecord> records;
  guarded("evaluate", -1, [&] {
    const io::TrajectoryFile est_camera =
        io::read_trajectory(track_dir / "trajectory_camera.txt");
    if (static_cast<int>(est_camera.poses.size()) != seq.frame_count) {
      throw DimensionMismatch(
          "estimated camera trajectory length does not match the sequence");
    }
    const eval::TrajectoryError cam_err =
        eval::trajectory_rmse(est_camera.poses, seq.gt_camera.poses);
    for (int f = 0; f < seq.frame_count; ++f) {
      rows.push_back({f, "camera_position_error", 0,
                      cam_err.position_errors[static_cast<std::size_t>(f)]});
      rows.push_back(
          {f, "camera_rotation_error", 0,
           cam_err.rotation_errors_deg[static_cast<std::size_t>(f)]});
    }
    summary["camera_position_rmse_m"] = format_compact(cam_err.position_rmse);
    summary["camera_rotation_rmse_deg"] =
        format_compact(cam_err.rotation_rmse);
    records = read_tracked_objects(track_dir);
    summary["motion_model_count"] = std::to_string(1 + records.size());
  });

  // Majority persistent label per track across all frames, against the
  // constant ground-truth label. Ties take the smaller label so reruns
  // agree bit for bit.
  std::map<int, int> est_to_gt;  // est object label -> matched gt label
  std::map<int, int> gt_to_est;  // gt label -> representative est label
  guarded("evaluate", -1, [&] {
    std::map<std::int64_t, std::map<int, int>> counts;
    for (int f = 1; f < seq.frame_count; ++f) {
      for (const auto& [id, label] :
           read_track_labels(track_dir / "labels" / frame_txt(f))) {
        ++counts[id][label];
      }
    }
    std::map<std::int64_t, int> est_majority;
    for (const auto& [id, by_label] : counts) {
      int best_label = 0;
      int best_count = -1;
      for (const auto& [label, count] : by_label) {
        if (count > best_count) {
          best_label = label;
          best_count = count;
        }
      }
      est_majority[id] = best_label;
    }

    std::map<std::int64_t, int> gt_labels;
    for (const FrameFeatures& frame : seq.frames) {
      for (const StereoFeature& sf : frame) {
        if (sf.gt_label >= 0) gt_labels[sf.track_id] = sf.gt_label;
      }
    }

    summary["misclassification_rate"] =
        format_compact(eval::segmentation_accuracy(est_majority, gt_labels));

    // Joint occurrence counts link estimated object labels to ground-truth
    // ones; each gt object keeps its strongest estimated counterpart.
    std::map<int, std::map<int, int>> joint;
    for (const auto& [id, est_label] : est_majority) {
      auto it = gt_labels.find(id);
      if (it != gt_labels.end() && est_label > 0) {
        ++joint[est_label][it->second];
      }
    }
    for (const auto& [est_label, by_gt] : joint) {
      int best_gt = 0;
      int best_count = -1;
      for (const auto& [gt, count] : by_gt) {
        if (count > best_count) {
          best_gt = gt;
          best_count = count;
        }
      }
      if (best_gt > 0) est_to_gt[est_label] = best_gt;
    }
    std::map<int, int> gt_strength;
    for (const ObjectRecord& rec : records) {
      auto it = est_to_gt.find(rec.label);
      if (it == est_to_gt.end()) continue;
      const int gt = it->second;
      const int strength = joint[rec.label][gt];
      auto cur = gt_to_est.find(gt);
      if (cur == gt_to_est.end() || strength > gt_strength[gt]) {
        gt_to_est[gt] = rec.label;
        gt_strength[gt] = strength;
      }
    }
  });

  // Object trajectories are compared as motion relative to the first fitted
  // frame, over fitted frames only; coasted poses carry no information.
  guarded("evaluate", -1, [&] {
    for (const auto& [gt_label, est_label] : gt_to_est) {
      const auto rec_it =
          std::find_if(records.begin(), records.end(),
                       [&](const ObjectRecord& r) { return r.label == est_label; });
      const auto gt_it = seq.gt_objects.find(gt_label);
      if (rec_it == records.end() || gt_it == seq.gt_objects.end()) continue;
      const ObjectRecord& rec = *rec_it;
      const std::vector<Pose>& gt_poses = gt_it->second.poses;

      std::vector<int> frames;
      for (int f : rec.observed) {
        if (rec.covers(f) && f < static_cast<int>(gt_poses.size())) {
          frames.push_back(f);
        }
      }
      if (frames.empty()) continue;
      const int f0 = frames.front();
      const Pose est_anchor_inv = rec.global_at(f0).inverse();
      const Pose gt_anchor_inv =
          gt_poses[static_cast<std::size_t>(f0)].inverse();

      std::vector<Pose> est_rel;
      std::vector<Pose> gt_rel;
      est_rel.reserve(frames.size());
      gt_rel.reserve(frames.size());
      for (int f : frames) {
        est_rel.push_back(rec.global_at(f) * est_anchor_inv);
        gt_rel.push_back(gt_poses[static_cast<std::size_t>(f)] *
                         gt_anchor_inv);
      }
      const eval::TrajectoryError err = eval::trajectory_rmse(est_rel, gt_rel);
      for (std::size_t i = 0; i < frames.size(); ++i) {
        rows.push_back({frames[i], "object_position_error", gt_label,
                        err.position_errors[i]});
        rows.push_back({frames[i], "object_rotation_error", gt_label,
                        err.rotation_errors_deg[i]});
      }
      const std::string prefix = "object_" + std::to_string(gt_label);
      summary[prefix + "_position_rmse_m"] = format_compact(err.position_rmse);
      summary[prefix + "_rotation_rmse_deg"] =
          format_compact(err.rotation_rmse);
      summary[prefix + "_est_label"] = std::to_string(est_label);
    }
  });

  // Densified masks against the rendered ground-truth labels, before and
  // after silhouette refinement. Estimated labels are remapped into ground
  // truth ids; unmatched ones become -1 so they count against every label.
  guarded("evaluate", -1, [&] {
    eval::IoUSeries voted_series;
    eval::IoUSeries refined_series;
    for (int f = 1; f < seq.frame_count; ++f) {
      mask::LabelMask voted = read_label_mask(recon_dir / "masks_voted" /
                                              mask_pgm(f));
      mask::LabelMask refined =
          read_label_mask(recon_dir / "masks" / mask_pgm(f));
      auto remap = [&](mask::LabelMask& m) {
        for (int& label : m.labels) {
          if (label <= 0) continue;
          auto it = est_to_gt.find(label);
          label = (it == est_to_gt.end()) ? -1 : it->second;
        }
      };
      remap(voted);
      remap(refined);
      for (const auto& [gt_label, traj] : seq.gt_objects) {
        (void)traj;
        const double iou_voted =
            eval::mask_iou(voted, seq.grids[static_cast<std::size_t>(f)],
                           gt_label);
        const double iou_refined =
            eval::mask_iou(refined, seq.grids[static_cast<std::size_t>(f)],
                           gt_label);
        rows.push_back({f, "iou_voted", gt_label, iou_voted});
        rows.push_back({f, "iou_refined", gt_label, iou_refined});
        voted_series.add(gt_label, iou_voted);
        refined_series.add(gt_label, iou_refined);
      }
    }
    for (const auto& [label, mean] : voted_series.mean_per_label()) {
      summary["mean_iou_voted_label_" + std::to_string(label)] =
          format_compact(mean);
    }
    for (const auto& [label, mean] : refined_series.mean_per_label()) {
      summary["mean_iou_refined_label_" + std::to_string(label)] =
          format_compact(mean);
    }
  });

  guarded("evaluate", -1, [&] {
    eval::write_metrics_csv(metrics_csv, rows);
    fs::path summary_path = metrics_csv;
    summary_path.replace_extension(".summary.txt");
    io::KeyValues kv(summary.begin(), summary.end());
    io::write_key_value_file(summary_path, kv, "evaluation summary");
  });
  return summary;
}

PipelineResult run_pipeline(const sim::SceneSpec& spec,
                            const PipelineConfig& cfg,
                            const fs::path& out_root) {
  guarded("run", -1, [&] { ensure_dir(out_root); });
  simulate_stage(spec, out_root / "sequence");
  segment_stage(out_root / "sequence", cfg, out_root / "segmentation");
  track_stage(out_root / "sequence", out_root / "segmentation", cfg,
              out_root / "tracking");
  reconstruct_stage(out_root / "sequence", out_root / "tracking", cfg,
                    out_root / "reconstruction");
  PipelineResult result;
  result.root = out_root;
  result.summary =
      evaluate_stage(out_root, out_root / "sequence", out_root / "metrics.csv");
  return result;
}

}  // namespace dym::pipeline
