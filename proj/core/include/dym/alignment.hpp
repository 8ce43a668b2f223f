#pragma once

#include <vector>

#include "dym/correspondence.hpp"
#include "dym/geometry.hpp"

namespace dym {

/// Least-squares rigid transform T with T(p_prev) ~= p_curr, optionally
/// weighted per pair. Closed form: weighted centroids, SVD of the 3x3
/// cross-covariance, determinant sign correction so the result is a proper
/// rotation.
///
/// Throws DegenerateGeometry for fewer than 3 pairs with positive weight or
/// when the source points are (numerically) collinear.
Pose estimate_rigid_alignment(const std::vector<Correspondence3D>& pairs,
                              const std::vector<double>& weights = {});

/// Root-mean-square of |T(p_prev) - p_curr| over the pairs.
double alignment_rmse(const Pose& pose,
                      const std::vector<Correspondence3D>& pairs);

}  // namespace dym
