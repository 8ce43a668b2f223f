// dymrec: dynamic stereo scene reconstruction pipeline.
//
// Subcommands mirror the pipeline stages; each one reads and writes plain
// directories, so stages can be rerun or swapped out individually. `run`
// chains all of them and behaves identically to running the stages by hand.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure, 1 anything unexpected.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "dym/pipeline/config.hpp"
#include "dym/pipeline/stages.hpp"

namespace {

int exit_code_for(dym::pipeline::ErrorCategory category) {
  switch (category) {
    case dym::pipeline::ErrorCategory::kConfig:
      return 2;
    case dym::pipeline::ErrorCategory::kData:
      return 3;
    case dym::pipeline::ErrorCategory::kNumeric:
      return 4;
  }
  return 1;
}

dym::pipeline::PipelineConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return {};
  return dym::pipeline::load_pipeline_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"4D reconstruction of dynamic scenes from stereo tracks"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string config_path;
  std::string seq_dir;
  std::string labels_dir;
  std::string track_dir;
  std::string est_dir;
  std::string gt_dir;
  std::string out_path;

  auto* simulate = app.add_subcommand(
      "simulate", "Generate a synthetic stereo sequence from a scene file");
  simulate->add_option("--spec", spec_path, "Scene description file")
      ->required();
  simulate->add_option("--out", out_path, "Sequence output directory")
      ->required();

  auto* segment = app.add_subcommand(
      "segment", "Per-frame multi-motion segmentation of feature tracks");
  segment->add_option("--seq", seq_dir, "Sequence directory")->required();
  segment->add_option("--config", config_path, "Pipeline config file");
  segment->add_option("--out", out_path, "Raw label output directory")
      ->required();

  auto* track = app.add_subcommand(
      "track", "Temporal tracking: persistent labels and trajectories");
  track->add_option("--seq", seq_dir, "Sequence directory")->required();
  track->add_option("--labels", labels_dir, "Segmentation output directory")
      ->required();
  track->add_option("--config", config_path, "Pipeline config file");
  track->add_option("--out", out_path, "Tracking output directory")
      ->required();

  auto* reconstruct = app.add_subcommand(
      "reconstruct", "Dense label masks, static map, and object clouds");
  reconstruct->add_option("--seq", seq_dir, "Sequence directory")->required();
  reconstruct->add_option("--track", track_dir, "Tracking output directory")
      ->required();
  reconstruct->add_option("--config", config_path, "Pipeline config file");
  reconstruct->add_option("--out", out_path, "Reconstruction output directory")
      ->required();

  auto* evaluate = app.add_subcommand(
      "evaluate", "Compare a run against the sequence ground truth");
  evaluate
      ->add_option("--est", est_dir,
                   "Run root containing tracking/ and reconstruction/")
      ->required();
  evaluate->add_option("--gt", gt_dir, "Sequence directory with ground truth")
      ->required();
  evaluate->add_option("--out", out_path, "Metrics CSV path")->required();

  auto* run = app.add_subcommand("run", "All stages end to end");
  run->add_option("--spec", spec_path, "Scene description file")->required();
  run->add_option("--config", config_path, "Pipeline config file");
  run->add_option("--out", out_path, "Run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      dym::pipeline::simulate_stage(
          dym::pipeline::load_scene_spec(spec_path), out_path);
    } else if (segment->parsed()) {
      dym::pipeline::segment_stage(seq_dir, load_config_or_default(config_path),
                                   out_path);
    } else if (track->parsed()) {
      dym::pipeline::track_stage(seq_dir, labels_dir,
                                 load_config_or_default(config_path), out_path);
    } else if (reconstruct->parsed()) {
      dym::pipeline::reconstruct_stage(
          seq_dir, track_dir, load_config_or_default(config_path), out_path);
    } else if (evaluate->parsed()) {
      const auto summary =
          dym::pipeline::evaluate_stage(est_dir, gt_dir, out_path);
      for (const auto& [key, value] : summary) {
        std::printf("%s = %s\n", key.c_str(), value.c_str());
      }
    } else if (run->parsed()) {
      const auto result = dym::pipeline::run_pipeline(
          dym::pipeline::load_scene_spec(spec_path),
          load_config_or_default(config_path), out_path);
      for (const auto& [key, value] : result.summary) {
        std::printf("%s = %s\n", key.c_str(), value.c_str());
      }
    }
  } catch (const dym::Error& e) {
    std::fprintf(stderr, "dymrec: %s\n", e.what());
    return exit_code_for(dym::pipeline::classify_error(e));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dymrec: unexpected error: %s\n", e.what());
    return 1;
  }
  return 0;
}
