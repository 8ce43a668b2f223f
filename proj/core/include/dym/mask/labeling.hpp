#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "dym/errors.hpp"
#include "dym/geometry.hpp"
#include "dym/label_grid.hpp"
#include "dym/stereo_camera.hpp"

namespace dym::mask {

/// Tuning for superpixel clustering and label densification.
///
/// The distance between two pixels (or cluster centers) is
///
///   D  = |color_a - color_b|^2 / color_normalizer^2
///      + ((x_a - x_b)^2 + (y_a - y_b)^2) / spatial_normalizer^2
///   D' = D + (1/depth_a - 1/depth_b)^2 / inv_depth_normalizer^2
///
/// so smaller normalizers weight their term more heavily. The inverse-depth
/// term separates surfaces that touch in the image but sit at different
/// ranges, which is what lets region boundaries snap to object silhouettes.
struct SuperpixelParams {
  /// Requested number of superpixels; the seed lattice rounds this to the
  /// nearest full grid, so the actual count can differ slightly.
  int target_count = 400;

  double color_normalizer = 0.2;
  /// Pixel-distance normalizer. Zero means "use the seed lattice spacing",
  /// resolved when a grid is clustered.
  double spatial_normalizer = 0.0;
  double inv_depth_normalizer = 0.5;  // 1/meters

  int iterations = 10;

  /// Neighbor count used when propagating labels to featureless superpixels.
  int knn_k = 5;

  /// Fraction of a superpixel's area that must be covered by its model's
  /// projected mask for the label to survive refinement.
  double overlap_threshold = 0.9;

  /// Throws ConfigError when a field is outside its documented range.
  void validate() const;
};

/// Position in the joint color/image/depth feature space. Cluster centers
/// and single pixels share this representation.
struct SuperpixelFeature {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();  // channels in [0,1]
  double x = 0.0;  // pixels
  double y = 0.0;
  double depth = 0.0;  // meters
};

/// Feature vector of one grid pixel.
inline SuperpixelFeature pixel_feature(const LabelGrid& grid, int x, int y) {
  const std::size_t i = grid.index(x, y);
  return {grid.color[i], static_cast<double>(x), static_cast<double>(y),
          grid.depth[i]};
}

/// Oversegmentation of a label grid. Every pixel belongs to exactly one
/// superpixel and each superpixel is 4-connected in the image.
struct SuperpixelGrid {
  int width = 0;
  int height = 0;
  /// Row-major per-pixel superpixel index in [0, count()).
  std::vector<int> assignment;
  /// Mean feature of each superpixel's member pixels.
  std::vector<SuperpixelFeature> centers;
  /// Seed lattice spacing in pixels; the resolved spatial normalizer.
  double spacing = 0.0;

  int count() const { return static_cast<int>(centers.size()); }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

/// Distance between two feature-space positions. `use_depth` selects D'
/// (with the inverse-depth term) over the color/image-only D.
///
/// Throws ConfigError when a needed normalizer is not positive (an
/// unresolved spatial normalizer included) and NonPositiveDepth when
/// `use_depth` is set and either depth is <= 0.
double superpixel_distance(const SuperpixelFeature& a,
                           const SuperpixelFeature& b,
                           const SuperpixelParams& params, bool use_depth);

/// Clusters the grid into superpixels.
///
/// Seeds form a near-regular lattice with spacing sqrt(pixels / target),
/// each pixel competes among centers within a 2x-spacing window under D',
/// and centers move to their members' means each iteration. A final pass
/// re-attaches disconnected fragments to the adjacent superpixel with the
/// nearest center, so the connectivity and partition invariants hold on
/// the returned grid.
///
/// Throws ConfigError for bad params or an empty/undersized grid and
/// NonPositiveDepth when any grid depth is <= 0.
SuperpixelGrid compute_superpixels(const LabelGrid& grid,
                                   const SuperpixelParams& params);

/// A tracked feature's pixel position in the current left image together
/// with its persistent motion label (0 = static background).
struct LabeledFeature {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  int label = 0;
};

/// Assigns one label per superpixel from sparse labeled features.
///
/// A superpixel containing features takes their plurality label, ties
/// resolving to 0. Featureless superpixels then vote over the labels of
/// their `knn_k` nearest superpixels (by D' between centers), iterating
/// synchronously until every superpixel is labeled; a round that cannot
/// make progress falls back to the single nearest labeled center.
///
/// Features outside the grid are ignored. Throws EmptyScene when no
/// feature lands on the grid, ConfigError for bad params.
std::vector<int> vote_superpixel_labels(const SuperpixelGrid& grid,
                                        const std::vector<LabeledFeature>& features,
                                        const SuperpixelParams& params);

/// Dense binary image, row-major.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  bool at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v) {
    data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const;
};

/// Renders the silhouette of an accumulated model cloud into the current
/// left view.
///
/// Each point is moved by `model_pose`, expressed in the camera frame via
/// `camera_pose`, and splatted as a filled disk whose radius is
/// `splat_radius_px` at 1 m range and shrinks with 1/z. One morphological
/// closing bridges gaps between neighboring splats. Points behind the
/// camera or projecting outside the image are skipped; when nothing lands
/// (including an empty cloud) the mask comes back all-false.
BinaryMask project_model_mask(const std::vector<Eigen::Vector3d>& points,
                              const Pose& model_pose, const Pose& camera_pose,
                              const StereoCamera& cam,
                              double splat_radius_px = 3.0);

/// Drops voted object labels that the model's own silhouette does not
/// confirm: a superpixel labeled L reverts to 0 unless at least
/// `threshold` of its pixels fall inside masks.at(L). Labels without an
/// entry in `masks` pass through unchanged, so models that have not yet
/// accumulated a cloud keep their voted support. Never grows a label;
/// threshold 0 keeps everything.
///
/// Throws ConfigError for threshold outside [0, 1], LengthMismatch when
/// `labels` does not match the grid's superpixel count, and
/// DimensionMismatch when a mask's size differs from the grid's.
std::vector<int> refine_with_projected_mask(
    const SuperpixelGrid& grid, const std::vector<int>& labels,
    const std::map<int, BinaryMask>& masks, double threshold);

/// Dense per-pixel motion labels, 0 = static background.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // row-major

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

/// Expands per-superpixel labels to a dense mask.
/// Throws LengthMismatch when `labels` does not match the superpixel count.
LabelMask expand_to_mask(const SuperpixelGrid& grid,
                         const std::vector<int>& labels);

}  // namespace dym::mask
