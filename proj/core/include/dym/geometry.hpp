#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace dym {

using Point3 = Eigen::Vector3d;

/// Rigid SE(3) transform stored as a unit quaternion plus translation.
///
/// The quaternion is re-normalized by every constructor and composition so
/// the unit-norm invariant survives long chains of increments.
class Pose {
 public:
  Pose()
      : rotation_(Eigen::Quaterniond::Identity()),
        translation_(Eigen::Vector3d::Zero()) {}

  Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation.normalized()), translation_(translation) {}

  static Pose identity() { return {}; }

  static Pose from_axis_angle(
      const Eigen::Vector3d& axis, double angle_rad,
      const Eigen::Vector3d& translation = Eigen::Vector3d::Zero()) {
    return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())),
                translation);
  }

  static Pose translate(const Eigen::Vector3d& t) {
    return Pose(Eigen::Quaterniond::Identity(), t);
  }

  static Pose from_matrix(const Eigen::Matrix4d& m) {
    return Pose(Eigen::Quaterniond(Eigen::Matrix3d(m.topLeftCorner<3, 3>())),
                m.topRightCorner<3, 1>());
  }

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_.toRotationMatrix();
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

  /// Composition applies `b` first: (a * b).apply(p) == a.apply(b.apply(p)).
  friend Pose operator*(const Pose& a, const Pose& b) {
    return Pose(a.rotation_ * b.rotation_,
                a.rotation_ * b.translation_ + a.translation_);
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return apply(p); }

  Pose inverse() const {
    const Eigen::Quaterniond qi = rotation_.conjugate();
    return Pose(qi, qi * (-translation_));
  }

  /// Magnitude of the rotation, in [0, pi].
  double rotation_angle_rad() const {
    const double w = std::min(1.0, std::abs(rotation_.w()));
    return 2.0 * std::acos(w);
  }

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

/// Angle of the relative rotation between two poses, in [0, pi].
inline double rotation_angle_between_rad(const Pose& a, const Pose& b) {
  return (a.inverse() * b).rotation_angle_rad();
}

inline double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm();
}

inline bool approx_equal(const Pose& a, const Pose& b, double rot_tol_rad,
                         double trans_tol) {
  return rotation_angle_between_rad(a, b) <= rot_tol_rad &&
         translation_distance(a, b) <= trans_tol;
}

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace dym
