#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dym/correspondence.hpp"
#include "dym/geometry.hpp"

namespace dym::seg {

/// N x M residuals in meters: entry (i, j) is how badly hypothesis j
/// explains pair i.
using ResidualMatrix = Eigen::MatrixXd;

/// Row-major packed boolean matrix sized for fast row intersection
/// and union during clustering.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), words_per_row_((cols + 63) / 64),
        bits_(static_cast<std::size_t>(rows) * words_per_row_, 0) {}

  void set(int r, int c) {
    bits_[static_cast<std::size_t>(r) * words_per_row_ + c / 64] |=
        std::uint64_t{1} << (c % 64);
  }
  bool test(int r, int c) const {
    return (bits_[static_cast<std::size_t>(r) * words_per_row_ + c / 64] >>
            (c % 64)) & 1;
  }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int words_per_row() const { return words_per_row_; }
  const std::uint64_t* row(int r) const {
    return bits_.data() + static_cast<std::size_t>(r) * words_per_row_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  int words_per_row_ = 0;
  std::vector<std::uint64_t> bits_;
};

/// Quantized preferences. values(i, j) is the kept quantized residual
/// (0 when truncated); support(i, j) says whether hypothesis j is in
/// point i's preference set. Clustering consumes support only: at small
/// lambda almost every kept value is 0 or 1, so the boolean set is the
/// meaningful signal.
struct PreferenceMatrix {
  Eigen::MatrixXi values;
  BitMatrix support;
};

enum class LinkagePolicy {
  kSingle,        // min pairwise row distance; stop at 1
  kIntersection,  // cluster preference = intersection of member supports
};

struct SegmentationParams {
  int theta = 200;             // quantizing level, [100, 800]
  int lambda = 1;              // quantifying length, [1, 50]
  int hypothesis_count = 200;  // M
  int min_cluster_size = 5;
  int refinement_rounds = 3;
  double inlier_threshold = 0.05;  // meters
  std::uint64_t rng_seed = 0;
  double guided_fraction = 0.7;  // share of samples drawn inside one cluster
  LinkagePolicy linkage_policy = LinkagePolicy::kIntersection;

  void validate() const;  // throws ConfigError
};

struct MotionModel {
  int label = 0;
  Pose pose;
  std::vector<std::int64_t> inlier_track_ids;
};

/// labels[i] is the model label of pairs[i], 0 when unassigned.
struct MotionSegmentation {
  std::vector<int> labels;
  std::vector<MotionModel> models;
};

struct ClusterSet {
  std::vector<std::vector<int>> clusters;  // pair indices, each sorted
  std::vector<int> unassigned;
};

/// Fits `count` rigid hypotheses on minimal samples of 3 pairs. Without
/// guidance, samples are biased toward spatially close triples; with
/// guidance, guided_fraction of the samples are drawn entirely within a
/// single cluster. Degenerate samples are skipped; throws
/// InsufficientHypotheses when fewer than count/2 fits succeed.
std::vector<Pose> sample_hypotheses(const std::vector<Correspondence3D>& pairs,
                                    int count,
                                    const ClusterSet* guidance,
                                    std::uint64_t seed,
                                    double guided_fraction = 0.7);

/// residual(i, j) = |p_curr_i - T_j(p_prev_i)|.
ResidualMatrix compute_residuals(const std::vector<Pose>& hypotheses,
                                 const std::vector<Correspondence3D>& pairs);

/// Min-max quantization of each residual column to [0, theta], truncated at
/// lambda. Columns whose residual range is degenerate (max == min, up to
/// float dust) quantize to 0 with every row supported.
PreferenceMatrix quantize_preferences(const ResidualMatrix& residuals,
                                      int theta, int lambda);

/// Agglomerative clustering over Jaccard distances between support sets,
/// stopping when the closest pair of clusters is fully disjoint. Rows with
/// empty support and clusters below min_cluster_size come back unassigned.
ClusterSet linkage_cluster(const PreferenceMatrix& preferences,
                           int min_cluster_size,
                           LinkagePolicy policy = LinkagePolicy::kIntersection);

/// Full alternating loop: sample -> residuals -> quantize -> cluster,
/// re-sampling inside clusters on later rounds, then a robust per-cluster
/// refit and a merge of near-identical models. Deterministic per seed.
MotionSegmentation segment_motions(const std::vector<Correspondence3D>& pairs,
                                   const SegmentationParams& params);

}  // namespace dym::seg
