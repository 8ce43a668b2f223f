#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "dym/errors.hpp"
#include "dym/pipeline/config.hpp"
#include "dym/pipeline/sequence.hpp"

namespace dym::pipeline {

/// Coarse failure classes, reported by the command line tool as exit codes.
enum class ErrorCategory {
  kConfig,   // bad parameter or config file
  kData,     // unreadable, malformed, or inconsistent input
  kNumeric,  // the math gave up: degenerate geometry, no models, ...
};

ErrorCategory classify_error(const Error& e);

/// A stage failure wrapped with the stage name and, when known, the frame
/// index, so batch runs can be diagnosed from the message alone.
class PipelineError : public Error {
 public:
  PipelineError(ErrorCategory category, const std::string& what)
      : Error(what), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

/// Simulates a scene and materializes it as a sequence directory.
void simulate_stage(const sim::SceneSpec& spec,
                    const std::filesystem::path& seq_dir);

/// Runs per-frame multi-motion segmentation over consecutive-frame feature
/// pairs. Writes one raw label file per frame (frame_%06d.txt, frames
/// 1..N-1) into out_dir.
void segment_stage(const std::filesystem::path& seq_dir,
                   const PipelineConfig& cfg,
                   const std::filesystem::path& out_dir);

/// Feeds the per-frame segmentation into the temporal tracker. Writes
/// labels/frame_%06d.txt (persistent labels, camera remapped to 0),
/// trajectory_camera.txt, trajectory_object_<label>.txt per surviving
/// object, and objects.txt describing birth frames, anchors, and the frames
/// each object was actually fit on.
void track_stage(const std::filesystem::path& seq_dir,
                 const std::filesystem::path& seg_dir,
                 const PipelineConfig& cfg,
                 const std::filesystem::path& out_dir);

/// Densifies the sparse labels over superpixels, refines them against each
/// model's projected silhouette, and fuses the static map and per-object
/// clouds. Writes masks_voted/, masks/, and scene/ (the exported 4D scene)
/// into out_dir.
void reconstruct_stage(const std::filesystem::path& seq_dir,
                       const std::filesystem::path& track_dir,
                       const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir);

/// Compares a finished run against the sequence's ground truth. `est_root`
/// must contain tracking/ and reconstruction/. Writes the per-frame metric
/// rows to metrics_csv and aggregate values to a sibling .summary.txt file;
/// returns the aggregates. Object trajectory errors are birth-anchored
/// relative motions over the frames the tracker actually fit.
std::map<std::string, std::string> evaluate_stage(
    const std::filesystem::path& est_root,
    const std::filesystem::path& seq_dir,
    const std::filesystem::path& metrics_csv);

struct PipelineResult {
  std::filesystem::path root;
  std::map<std::string, std::string> summary;
};

/// The whole pipeline: simulate, segment, track, reconstruct, evaluate.
/// Every stage reads its inputs from the directories the previous stage
/// wrote under out_root, so a full run and a manually chained run produce
/// identical files.
PipelineResult run_pipeline(const sim::SceneSpec& spec,
                            const PipelineConfig& cfg,
                            const std::filesystem::path& out_root);

}  // namespace dym::pipeline
