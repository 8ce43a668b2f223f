#include "dym/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace dym::eval {

namespace {

double rms(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum / static_cast<double>(values.size()));
}

/// Largest total agreement over one-to-one matchings of row labels to
/// column labels. Bitmask DP over the column side; callers keep that side
/// the smaller one.
long best_assignment(const std::vector<std::vector<long>>& counts) {
  const std::size_t rows = counts.size();
  const std::size_t cols = rows == 0 ? 0 : counts[0].size();
  if (cols > 20) {
    throw ConfigError("too many distinct labels to match: " +
                      std::to_string(cols));
  }
  std::vector<long> dp(std::size_t{1} << cols, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    // Iterate masks descending so each row is used at most once.
    for (std::size_t mask = dp.size(); mask-- > 0;) {
      for (std::size_t j = 0; j < cols; ++j) {
        if (mask & (std::size_t{1} << j)) continue;
        const std::size_t next = mask | (std::size_t{1} << j);
        dp[next] = std::max(dp[next], dp[mask] + counts[i][j]);
      }
    }
  }
  return *std::max_element(dp.begin(), dp.end());
}

}  // namespace

TrajectoryError trajectory_rmse(const std::vector<Pose>& estimated,
                                const std::vector<Pose>& ground_truth) {
  if (estimated.size() != ground_truth.size()) {
    throw LengthMismatch("trajectories differ in length: " +
                         std::to_string(estimated.size()) + " vs " +
                         std::to_string(ground_truth.size()));
  }
  TrajectoryError err;
  err.position_errors.reserve(estimated.size());
  err.rotation_errors_deg.reserve(estimated.size());
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    err.position_errors.push_back(
        translation_distance(estimated[i], ground_truth[i]));
    err.rotation_errors_deg.push_back(
        rad_to_deg(rotation_angle_between_rad(estimated[i], ground_truth[i])));
  }
  err.position_rmse = rms(err.position_errors);
  err.rotation_rmse = rms(err.rotation_errors_deg);
  return err;
}

void IoUSeries::add(int label, double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError("IoU value outside [0,1]: " + std::to_string(value));
  }
  per_label[label].push_back(value);
}

std::map<int, double> IoUSeries::mean_per_label() const {
  std::map<int, double> means;
  for (const auto& [label, values] : per_label) {
    if (values.empty()) continue;
    means[label] = std::accumulate(values.begin(), values.end(), 0.0) /
                   static_cast<double>(values.size());
  }
  return means;
}

double mask_iou(const mask::LabelMask& a, const mask::LabelMask& b,
                int label) {
  if (a.width != b.width || a.height != b.height ||
      a.labels.size() != b.labels.size()) {
    throw DimensionMismatch("label masks differ in size");
  }
  long inter = 0;
  long uni = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool in_a = a.labels[i] == label;
    const bool in_b = b.labels[i] == label;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  if (uni == 0) return 1.0;  // the label appears in neither mask
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_iou(const mask::LabelMask& estimated,
                const LabelGrid& ground_truth, int label) {
  mask::LabelMask gt{ground_truth.width, ground_truth.height,
                     ground_truth.gt_label};
  return mask_iou(estimated, gt, label);
}

double segmentation_accuracy(const std::map<std::int64_t, int>& estimated,
                             const std::map<std::int64_t, int>& ground_truth) {
  // Contingency counts over the tracks both sides know about.
  std::map<int, std::size_t> est_index;
  std::map<int, std::size_t> gt_index;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [track, est_label] : estimated) {
    const auto gt = ground_truth.find(track);
    if (gt == ground_truth.end()) continue;
    const auto ei = est_index.emplace(est_label, est_index.size()).first;
    const auto gi = gt_index.emplace(gt->second, gt_index.size()).first;
    pairs.emplace_back(ei->second, gi->second);
  }
  if (pairs.empty()) {
    throw NoOverlap("no track id appears in both labelings");
  }

  std::vector<std::vector<long>> counts(
      est_index.size(), std::vector<long>(gt_index.size(), 0));
  for (const auto& [ei, gi] : pairs) ++counts[ei][gi];

  // Keep the bitmask side small; agreement is symmetric under transpose.
  if (gt_index.size() > est_index.size()) {
    std::vector<std::vector<long>> t(gt_index.size(),
                                     std::vector<long>(est_index.size(), 0));
    for (std::size_t i = 0; i < counts.size(); ++i)
      for (std::size_t j = 0; j < counts[i].size(); ++j) t[j][i] = counts[i][j];
    counts = std::move(t);
  }
  const long agreement = best_assignment(counts);
  const long total = static_cast<long>(pairs.size());
  return static_cast<double>(total - agreement) / static_cast<double>(total);
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  out << "frame,metric,label,value\n";
  char value[40];
  for (const auto& row : rows) {
    if (row.metric.find_first_of(",\n") != std::string::npos) {
      throw ConfigError("metric name may not contain ',' or newline: " +
                        row.metric);
    }
    std::snprintf(value, sizeof(value), "%.9f", row.value);
    out << row.frame << ',' << row.metric << ',' << row.label << ',' << value
        << '\n';
  }
  out.flush();
  if (!out) throw IoFailure("write failed: " + path.string());
}

}  // namespace dym::eval
