#pragma once

#include <filesystem>

#include "dym/est/tracking.hpp"
#include "dym/mask/labeling.hpp"
#include "dym/recon/cloud.hpp"
#include "dym/seg/segmentation.hpp"
#include "dym/sim/scene.hpp"

namespace dym::pipeline {

/// Fusion and mask-projection knobs used by the reconstruction stage.
struct ReconstructionParams {
  double object_voxel_edge = recon::kObjectVoxelEdge;
  double static_voxel_edge = recon::kStaticVoxelEdge;
  double mask_splat_radius_px = 3.0;

  void validate() const;  // throws ConfigError
};

/// Every tunable of the pipeline in one place. Defaults are usable as-is
/// and are tuned for noisy stereo input (wide preference tolerance, junk
/// cluster suppression); a config file overrides individual keys.
struct PipelineConfig {
  seg::SegmentationParams segmentation;
  est::TrackerParams tracker;
  mask::SuperpixelParams densify;
  ReconstructionParams reconstruction;

  /// Stereo depth error grows with z^2, so beyond some range triangulated
  /// points carry no usable motion signal. Pairs deeper than this never
  /// enter segmentation; their tracks stay label 0 (static), which is what
  /// distant structure almost always is.
  double segmentation_max_depth = 10.0;  // meters

  PipelineConfig() {
    segmentation.lambda = 30;
    segmentation.hypothesis_count = 300;
    segmentation.min_cluster_size = 8;
    segmentation.refinement_rounds = 3;
    segmentation.inlier_threshold = 0.1;
    tracker.inlier_threshold = 0.1;
  }

  void validate() const;  // throws ConfigError
};

/// Parses a sectioned key = value config file. Sections: [segmentation],
/// [tracking], [densify], [reconstruction]. Every key is optional and falls
/// back to its default; unknown sections or keys are rejected, and all
/// values must sit inside their documented ranges. Throws ConfigError,
/// ParseError, or IoFailure.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Parses a synthetic-scene description: [scene] and [camera] sections, a
/// [camera_motion] section, and one [object_N] section per object
/// (N = 1, 2, ... without gaps). Motion sections choose a kind:
///   static: start
///   line:   start, velocity (per frame)
///   spin:   center, axis, rate (radians per frame)
///   rect:   center, half_x, half_z, speed (axis-aligned rectangle in the
///           xz plane, walked counterclockwise from the -x,-z corner)
///   orbit:  start, velocity, radius, period (a line carrying a circular
///           offset in the xy plane, one revolution per `period` frames;
///           the offset starts at +x)
/// Throws ConfigError, ParseError, or IoFailure.
sim::SceneSpec load_scene_spec(const std::filesystem::path& path);

}  // namespace dym::pipeline
