#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dym/errors.hpp"
#include "dym/geometry.hpp"
#include "dym/label_grid.hpp"
#include "dym/mask/labeling.hpp"

namespace dym::eval {

/// Trajectory comparison result. The RMSE fields are always the
/// root-mean-square of the per-frame lists.
struct TrajectoryError {
  double position_rmse = 0.0;  // meters
  double rotation_rmse = 0.0;  // degrees
  std::vector<double> position_errors;
  std::vector<double> rotation_errors_deg;
};

/// Compares two trajectories frame by frame. Both must be expressed in the
/// same global frame; no alignment is applied, so a consistent offset shows
/// up in the error instead of being absorbed. The position error per frame
/// is the Euclidean distance between translations, the rotation error the
/// angle of the relative rotation in degrees. Throws LengthMismatch when
/// the trajectories differ in length.
TrajectoryError trajectory_rmse(const std::vector<Pose>& estimated,
                                const std::vector<Pose>& ground_truth);

/// Per-frame intersection-over-union per object label, with per-label means.
struct IoUSeries {
  std::map<int, std::vector<double>> per_label;

  void add(int label, double value);  // throws ConfigError outside [0,1]
  std::map<int, double> mean_per_label() const;
};

/// IoU of one label between two dense labelings: intersection count over
/// union count, 1.0 when neither side carries the label at all. Throws
/// DimensionMismatch when the masks disagree in size.
double mask_iou(const mask::LabelMask& a, const mask::LabelMask& b, int label);

/// Same metric against a ground-truth grid's labeling.
double mask_iou(const mask::LabelMask& estimated, const LabelGrid& ground_truth,
                int label);

/// Misclassification rate of per-track labels against ground truth. Only
/// tracks present on both sides are scored; estimated labels are first
/// matched to ground-truth labels by the one-to-one assignment that
/// maximizes agreement, so any relabeling permutation scores identically.
/// Returns mismatched / total in [0,1]. Throws NoOverlap when no track id
/// appears on both sides.
double segmentation_accuracy(const std::map<std::int64_t, int>& estimated,
                             const std::map<std::int64_t, int>& ground_truth);

/// One row of the metrics table.
struct MetricRow {
  int frame = 0;
  std::string metric;
  int label = 0;
  double value = 0.0;
};

/// Writes `frame,metric,label,value` rows behind a header line.
/// Throws IoFailure naming the path on write errors.
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricRow>& rows);

}  // namespace dym::eval
