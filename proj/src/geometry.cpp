#include "hdkit/geometry.hpp"

#include <cmath>
#include <numbers>

#include "hdkit/error.hpp"

namespace hdkit::geometry {

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidInput, "rotation axis must be nonzero");
  return from_rotation(Eigen::AngleAxisd(angle, axis / n).toRotationMatrix());
}

RigidTransform RigidTransform::from_quaternion(const Eigen::Vector4d& wxyz, const Vec3& t) {
  const double n = wxyz.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
    throw Error(ErrorCode::NotNormalized, "rotation quaternion norm " + std::to_string(n));
  }
  Eigen::Quaterniond q(wxyz[0] / n, wxyz[1] / n, wxyz[2] / n, wxyz[3] / n);
  return {q.toRotationMatrix(), t};
}

Eigen::Vector4d RigidTransform::quaternion() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {q.w(), q.x(), q.y(), q.z()};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform invert(const RigidTransform& t) {
  const Mat3 rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

Vec3 rotation_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

Mat3 rotation_exp(const Vec3& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  return Eigen::AngleAxisd(a.transpose() * b).angle();
}

RigidTransform interpolate_pose(const RigidTransform& a, const RigidTransform& b, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidInput, "interpolation parameter outside [0, 1]");
  const Eigen::AngleAxisd rel(a.rotation.transpose() * b.rotation);
  if (std::abs(rel.angle() - std::numbers::pi) <= kTolerance) {
    throw Error(ErrorCode::AntipodalRotation, "relative rotation is a half turn; geodesic undefined");
  }
  if (s == 0.0) return a;
  if (s == 1.0) return b;
  RigidTransform out;
  out.rotation = a.rotation * Eigen::AngleAxisd(s * rel.angle(), rel.axis()).toRotationMatrix();
  out.translation = (1.0 - s) * a.translation + s * b.translation;
  return out;
}

void PointSet::validate() const {
  for (const auto& p : points) {
    if (!p.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite point coordinate");
  }
  if (weights.empty()) return;
  if (weights.size() != points.size()) throw Error(ErrorCode::InvalidInput, "weight count does not match point count");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidInput, "weights must be finite and nonnegative");
    sum += w;
  }
  if (!(sum > 0.0)) throw Error(ErrorCode::InvalidInput, "weights must sum to a positive value");
}

Vec3 centroid(std::span<const Vec3> points) {
  Vec3 c = Vec3::Zero();
  if (points.empty()) return c;
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

int centered_rank(std::span<const Vec3> points, double rel_tol) {
  if (points.size() < 2) return 0;
  const Vec3 c = centroid(points);
  Eigen::MatrixXd centered(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) centered.row(static_cast<Eigen::Index>(i)) = (points[i] - c).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& sv = svd.singularValues();
  if (!(sv[0] > 0.0)) return 0;
  int rank = 1;
  for (Eigen::Index i = 1; i < sv.size(); ++i) {
    if (sv[i] > rel_tol * sv[0]) ++rank;
  }
  return rank;
}

Alignment kabsch_align(const PointSet& source, const PointSet& target) {
  source.validate();
  target.validate();
  if (source.size() != target.size()) throw Error(ErrorCode::InvalidInput, "source and target point counts differ");
  const std::size_t n = source.size();
  if (n < 3) throw Error(ErrorCode::DegenerateConfiguration, "alignment needs at least 3 points");

  // Source weights take precedence; target weights are used when the source carries none.
  const std::vector<double>& given = !source.weights.empty() ? source.weights : target.weights;
  std::vector<double> w = given.empty() ? std::vector<double>(n, 1.0) : given;

  std::vector<Vec3> support;
  support.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] > 0.0) support.push_back(source.points[i]);
  }
  if (support.size() < 3 || centered_rank(support) < 2) {
    throw Error(ErrorCode::DegenerateConfiguration, "source points are collinear or coincident");
  }

  double wsum = 0.0;
  Vec3 cs = Vec3::Zero();
  Vec3 ct = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    wsum += w[i];
    cs += w[i] * source.points[i];
    ct += w[i] * target.points[i];
  }
  cs /= wsum;
  ct /= wsum;

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    h += w[i] * (source.points[i] - cs) * (target.points[i] - ct).transpose();
  }
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  Alignment out;
  out.transform.rotation = v * d * u.transpose();
  out.transform.translation = ct - out.transform.rotation * cs;

  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sq += w[i] * (out.transform.apply(source.points[i]) - target.points[i]).squaredNorm();
  }
  out.rms_error = std::sqrt(sq / wsum);
  return out;
}

Alignment kabsch_align(std::span<const Vec3> source, std::span<const Vec3> target) {
  return kabsch_align(PointSet{{source.begin(), source.end()}, {}}, PointSet{{target.begin(), target.end()}, {}});
}

}  // namespace hdkit::geometry
