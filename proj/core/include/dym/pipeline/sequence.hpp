#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "dym/correspondence.hpp"
#include "dym/io/formats.hpp"
#include "dym/label_grid.hpp"
#include "dym/mask/labeling.hpp"
#include "dym/sim/simulator.hpp"
#include "dym/stereo_camera.hpp"

namespace dym::pipeline {

/// One frame of stereo feature tracks. The file starts with a `# dymseq v1`
/// header line; each data line is `track_id ul vl ur vr` plus an optional
/// trailing ground-truth label, pixels at 6 decimal places. A feature whose
/// gt_label is negative is written without the label column.
void write_sequence_frame(const std::filesystem::path& path,
                          const FrameFeatures& features);

/// Throws VersionMismatch for any header other than `# dymseq v1`, and
/// ParseError (with the line number) for malformed lines. `#` comment lines
/// after the header are skipped. Features missing the label column read
/// back with gt_label = -1.
FrameFeatures read_sequence_frame(const std::filesystem::path& path);

/// Binary 8-bit color image, one byte per channel, rgb interleaved.
void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& rgb);
void read_ppm(const std::filesystem::path& path, int& width, int& height,
              std::vector<std::uint8_t>& rgb);

/// Binary 16-bit grayscale image, big-endian samples, maxval 65535.
void write_pgm16(const std::filesystem::path& path, int width, int height,
                 const std::vector<std::uint16_t>& values);
void read_pgm16(const std::filesystem::path& path, int& width, int& height,
                std::vector<std::uint16_t>& values);

/// Stores a label grid as three images in `dir`: color_%06d.ppm (color
/// quantized to 8 bits), depth_%06d.pgm (millimeters, capped at 65.535 m),
/// gtlabel_%06d.pgm. Throws ConfigError when a label falls outside
/// [0, 65535].
void write_label_grid(const std::filesystem::path& dir, int frame,
                      const LabelGrid& grid);
LabelGrid read_label_grid(const std::filesystem::path& dir, int frame);

/// Dense per-pixel label masks, stored as 16-bit grayscale images.
void write_label_mask(const std::filesystem::path& path,
                      const mask::LabelMask& mask);
mask::LabelMask read_label_mask(const std::filesystem::path& path);

/// Per-track integer labels: a `# dymlabels v1` header, then one
/// `track_id label` line per track, sorted by id.
void write_track_labels(const std::filesystem::path& path,
                        const std::map<std::int64_t, int>& labels);
std::map<std::int64_t, int> read_track_labels(
    const std::filesystem::path& path);

/// A full sequence read back from disk.
struct SequenceData {
  StereoCamera camera;
  double grid_scale = 1.0;
  double far_plane = 40.0;
  double pixel_noise = 0.0;
  std::uint64_t seed = 0;
  int frame_count = 0;
  std::vector<FrameFeatures> frames;         // one per frame
  std::vector<LabelGrid> grids;              // empty when skipped on read
  io::TrajectoryFile gt_camera;              // camera -> global, all frames
  std::map<int, io::TrajectoryFile> gt_objects;  // label -> object -> global
};

/// Materializes a simulated sequence:
///   sequence_info.txt                  camera intrinsics and scene scalars
///   frames/frame_%06d.txt              stereo feature tracks
///   grids/color_*.ppm depth_*.pgm gtlabel_*.pgm   label grids
///   gt/trajectory_camera.txt           ground-truth camera trajectory
///   gt/trajectory_object_<label>.txt   ground-truth object trajectories
void write_sequence(const std::filesystem::path& dir,
                    const sim::SceneSpec& spec,
                    const sim::SimulationResult& result);

/// Reads a directory produced by write_sequence. Grids are the slow part;
/// stages that only need features pass with_grids = false.
SequenceData read_sequence(const std::filesystem::path& dir,
                           bool with_grids = true);

}  // namespace dym::pipeline
