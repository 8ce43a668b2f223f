#pragma once

#include <cstdint>
#include <vector>

#include "dym/alignment.hpp"
#include "dym/correspondence.hpp"
#include "dym/geometry.hpp"

namespace dym {

struct RansacResult {
  Pose pose;
  std::vector<std::size_t> inlier_indices;  // into the input pair list
  int iterations_run = 0;
};

/// Robust rigid fit over 3D pairs: minimal samples of 3, inlier when
/// |T(p_prev) - p_curr| < inlier_threshold, adaptive iteration count at
/// 0.999 confidence (capped by max_iterations), final refit on the best
/// inlier set. Fully deterministic for a given seed and input order.
///
/// Throws DegenerateGeometry when no sample yields at least 3 inliers.
RansacResult ransac_rigid(const std::vector<Correspondence3D>& pairs,
                          double inlier_threshold, int max_iterations,
                          std::uint64_t seed);

}  // namespace dym
