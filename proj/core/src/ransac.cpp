#include "dym/ransac.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dym/errors.hpp"

namespace dym {

namespace {

int adaptive_iteration_cap(double inlier_ratio, int sample_size,
                           int max_iterations) {
  constexpr double kConfidence = 0.999;
  if (inlier_ratio >= 1.0) return 1;
  const double p_good = std::pow(inlier_ratio, sample_size);
  if (p_good <= 0.0) return max_iterations;
  const double denom = std::log1p(-p_good);
  if (denom >= 0.0) return max_iterations;
  const double n = std::log(1.0 - kConfidence) / denom;
  if (n >= static_cast<double>(max_iterations)) return max_iterations;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

}  // namespace

RansacResult ransac_rigid(const std::vector<Correspondence3D>& pairs,
                          double inlier_threshold, int max_iterations,
                          std::uint64_t seed) {
  constexpr int kSampleSize = 3;
  const std::size_t n = pairs.size();
  if (n < kSampleSize) {
    throw DegenerateGeometry("ransac: need 3 pairs, got " + std::to_string(n));
  }
  if (!(inlier_threshold > 0.0)) {
    throw ConfigError("ransac: inlier threshold must be positive, got " +
                      std::to_string(inlier_threshold));
  }
  if (max_iterations < 1) {
    throw ConfigError("ransac: max_iterations must be >= 1, got " +
                      std::to_string(max_iterations));
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const double thresh_sq = inlier_threshold * inlier_threshold;

  std::vector<std::size_t> best_inliers;
  int iteration_cap = max_iterations;
  int it = 0;
  for (; it < iteration_cap; ++it) {
    std::size_t idx[kSampleSize];
    idx[0] = pick(rng);
    do {
      idx[1] = pick(rng);
    } while (idx[1] == idx[0]);
    do {
      idx[2] = pick(rng);
    } while (idx[2] == idx[0] || idx[2] == idx[1]);

    Pose candidate;
    try {
      candidate = estimate_rigid_alignment(
          {pairs[idx[0]], pairs[idx[1]], pairs[idx[2]]});
    } catch (const DegenerateGeometry&) {
      continue;  // collinear minimal sample
    }

    std::vector<std::size_t> inliers;
    inliers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if ((candidate.apply(pairs[i].p_prev) - pairs[i].p_curr).squaredNorm() <
          thresh_sq) {
        inliers.push_back(i);
      }
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      const double ratio =
          static_cast<double>(best_inliers.size()) / static_cast<double>(n);
      iteration_cap = std::min(
          iteration_cap, it + 1 + adaptive_iteration_cap(ratio, kSampleSize,
                                                         max_iterations));
    }
  }

  if (best_inliers.size() < kSampleSize) {
    throw DegenerateGeometry("ransac: no model with 3 inliers found");
  }

  std::vector<Correspondence3D> consensus;
  std::vector<double> weights;
  consensus.reserve(best_inliers.size());
  weights.reserve(best_inliers.size());
  for (std::size_t i : best_inliers) {
    consensus.push_back(pairs[i]);
    weights.push_back(pairs[i].weight);
  }

  RansacResult result;
  result.pose = estimate_rigid_alignment(consensus, weights);
  result.inlier_indices = std::move(best_inliers);
  result.iterations_run = it;
  return result;
}

}  // namespace dym
