#include "dym/alignment.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "dym/errors.hpp"

namespace dym {

Pose estimate_rigid_alignment(const std::vector<Correspondence3D>& pairs,
                              const std::vector<double>& weights) {
  if (!weights.empty() && weights.size() != pairs.size()) {
    throw LengthMismatch("alignment: " + std::to_string(pairs.size()) +
                         " pairs vs " + std::to_string(weights.size()) +
                         " weights");
  }

  double w_sum = 0.0;
  std::size_t n_effective = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w > 0.0) {
      w_sum += w;
      ++n_effective;
    }
  }
  if (n_effective < 3) {
    throw DegenerateGeometry("alignment needs 3 weighted pairs, got " +
                             std::to_string(n_effective));
  }

  Eigen::Vector3d c_prev = Eigen::Vector3d::Zero();
  Eigen::Vector3d c_curr = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w <= 0.0) continue;
    c_prev += w * pairs[i].p_prev;
    c_curr += w * pairs[i].p_curr;
  }
  c_prev /= w_sum;
  c_curr /= w_sum;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();      // curr * prev^T
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();  // prev spread
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w <= 0.0) continue;
    const Eigen::Vector3d a = pairs[i].p_prev - c_prev;
    const Eigen::Vector3d b = pairs[i].p_curr - c_curr;
    cov += w * b * a.transpose();
    scatter += w * a * a.transpose();
  }

  // Collinear (or coincident) sources leave a rotation axis unconstrained:
  // the two smallest scatter eigenvalues vanish relative to the largest.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
  if (ev(2) <= 0.0 || ev(1) <= 1e-12 * ev(2)) {
    throw DegenerateGeometry("alignment source points are collinear");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  const Eigen::Matrix3d r = svd.matrixU() * d * svd.matrixV().transpose();
  const Eigen::Vector3d t = c_curr - r * c_prev;
  return Pose(Eigen::Quaterniond(r), t);
}

double alignment_rmse(const Pose& pose,
                      const std::vector<Correspondence3D>& pairs) {
  if (pairs.empty()) return 0.0;
  double sq = 0.0;
  for (const auto& pr : pairs) {
    sq += (pose.apply(pr.p_prev) - pr.p_curr).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(pairs.size()));
}

}  // namespace dym
