#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <span>
#include <vector>

namespace hdkit::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Tolerance used for orthonormality and "equals" checks on rigid transforms.
inline constexpr double kTolerance = 1e-9;

/// SE(3) pose: p_out = rotation * p_in + translation. Translation in meters.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  /// Rotation of `angle` radians about a (not necessarily unit) axis.
  static RigidTransform from_axis_angle(const Vec3& axis, double angle);
  /// Unit quaternion (w, x, y, z). Throws NotNormalized if |q| deviates from 1 by more than 1e-6.
  static RigidTransform from_quaternion(const Eigen::Vector4d& wxyz, const Vec3& t = Vec3::Zero());

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  /// (w, x, y, z) with w >= 0.
  Eigen::Vector4d quaternion() const;
  Eigen::Matrix4d matrix() const;

  bool is_valid(double tol = kTolerance) const;
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

/// Rotation vector (axis * angle, angle in [0, pi]).
Vec3 rotation_log(const Mat3& r);
Mat3 rotation_exp(const Vec3& w);
/// Geodesic angle between two rotations.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Translation lerp plus constant-angular-velocity rotation blend.
/// Throws AntipodalRotation when the relative angle is pi within 1e-9.
RigidTransform interpolate_pose(const RigidTransform& a, const RigidTransform& b, double s);

struct PointSet {
  std::vector<Vec3> points;
  std::vector<double> weights;  // empty means uniform

  std::size_t size() const { return points.size(); }
  /// Throws InvalidInput on non-finite coordinates or bad weights.
  void validate() const;
};

struct Alignment {
  RigidTransform transform;
  double rms_error = 0.0;
};

/// Weighted least-squares rigid alignment mapping source onto target
/// (centroid removal, cross-covariance SVD, reflection correction).
/// Throws DegenerateConfiguration for fewer than 3 points or a collinear source.
Alignment kabsch_align(const PointSet& source, const PointSet& target);
Alignment kabsch_align(std::span<const Vec3> source, std::span<const Vec3> target);

/// Rank of the centered point cloud (0..3) using a relative singular-value threshold.
int centered_rank(std::span<const Vec3> points, double rel_tol = 1e-9);

Vec3 centroid(std::span<const Vec3> points);

}  // namespace hdkit::geometry
