#pragma once

#include <array>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "hdkit/geometry.hpp"
#include "hdkit/transfer.hpp"

namespace hdkit::feasibility {

using geometry::RigidTransform;
using geometry::Vec3;

inline constexpr int kJoints = 7;
using JointVector = Eigen::Matrix<double, kJoints, 1>;

/// Limit comparisons are done in radians against this exact conversion.
inline double deg2rad(double deg) { return deg * (std::numbers::pi / 180.0); }

struct Joint {
  Vec3 axis = Vec3::UnitZ();  // unit, in the frame preceding the joint
  RigidTransform link;        // fixed transform applied after the joint rotation
};

/// Serial 7-joint arm: T = base · Π_i Rot(axis_i, q_i) · link_i.
struct KinematicChain {
  RigidTransform base;
  std::array<Joint, kJoints> joints;

  /// Throws InvalidInput on non-unit axes or invalid transforms.
  void validate() const;
  /// Sum of link translation lengths, an upper bound on reach from the base origin.
  double reach() const;

  /// Synthetic test arm: axes z,y,z,y,z,y,z; links 0.2,0.2,0.2,0.2,0.1,0.05,0.05 m
  /// (1.0 m total); the fourth link turns 90° about y so the zero configuration
  /// is elbow-bent with the flange at base·(0.4, 0, 0.6) facing +x.
  static KinematicChain test_chain(const RigidTransform& base = RigidTransform::identity());
};

/// Per-joint soft limits in degrees.
struct JointLimits {
  std::array<double, kJoints> lower_deg{-360, -105, -360, -145, -360, -105, -360};
  std::array<double, kJoints> upper_deg{360, 105, 360, 30, 360, 105, 360};

  void validate() const;
};

struct VelocityLimits {
  double joint_max_deg_s = 180.0;
  double tcp_max_mm_s = 250.0;
  double max_gap_s = 0.1;

  void validate() const;
};

struct Limits {
  JointLimits joints;
  VelocityLimits velocity;
};

RigidTransform forward_kinematics(const KinematicChain& chain, const JointVector& q);

/// Geometric Jacobian in the world frame, rows [linear; angular].
Eigen::Matrix<double, 6, kJoints> jacobian(const KinematicChain& chain, const JointVector& q);

struct IkOptions {
  double damping = 1e-3;
  double max_step = 0.2;  // rad, largest component per iteration
  int max_iterations = 200;
  double position_tolerance = 1e-3;  // m, success threshold
  double rotation_tolerance = 1e-3;  // rad, success threshold
  double convergence = 1e-12;        // early-exit threshold on residual and null-space pull
};

struct IkResult {
  bool converged = false;
  JointVector q = JointVector::Zero();
  int iterations = 0;
  double position_error = 0.0;
  double rotation_error = 0.0;
};

/// Damped-least-squares differential IK. Redundancy is resolved by pulling the
/// null-space component toward the seed, so the result is locally the solution
/// closest to the seed. `converged == false` is the failure outcome and still
/// carries the final residuals.
IkResult solve_ik(const KinematicChain& chain, const RigidTransform& target, const JointVector& seed,
                  const IkOptions& options = {});

enum class Status { Ok, IkFailure, SoftLimit, JointOverspeed, TcpOverspeed, CommGap };

std::string to_string(Status s);

struct Violation {
  Status status = Status::Ok;
  int joint = -1;      // 0-based joint index when applicable
  double value = 0.0;  // measured quantity in the limit's units
  double limit = 0.0;
};

struct FrameVerdict {
  Status status = Status::Ok;          // first triggered check
  std::vector<Violation> violations;   // every triggered check, in evaluation order

  bool ok() const { return status == Status::Ok; }
};

struct PreviousFrame {
  double t = 0.0;  // time of the last solved frame
  JointVector q = JointVector::Zero();
  std::optional<double> last_seen_t;  // most recent frame time if later than t (stream-gap check)
};

struct FrameCheck {
  FrameVerdict verdict;
  JointVector q = JointVector::Zero();
  bool ik_solved = false;
};

/// Checks, in order: stream gap, IK, soft limits, joint speed, TCP speed.
FrameCheck check_frame(const KinematicChain& chain, const Limits& limits, const std::optional<PreviousFrame>& prev,
                       double t, const RigidTransform& target, const IkOptions& ik = {});

/// Same checks for an already-solved configuration (IK skipped).
FrameCheck check_joint_frame(const KinematicChain& chain, const Limits& limits, const std::optional<PreviousFrame>& prev,
                             double t, const JointVector& q);

struct LogEntry {
  std::size_t frame = 0;
  transfer::Arm arm = transfer::Arm::Left;
  FrameVerdict verdict;
};

struct EpisodeVerdict {
  bool valid = true;
  std::optional<std::size_t> first_invalid_frame;
  std::vector<LogEntry> log;  // frame-major, left before right
};

/// Validates both arms concurrently. Throws TimelineMismatch when the two
/// trajectories do not share sample times.
EpisodeVerdict validate_episode(const transfer::FlangeTrajectory& left, const transfer::FlangeTrajectory& right,
                                const KinematicChain& left_chain, const KinematicChain& right_chain,
                                const Limits& limits);

/// Key-value (INI) configs. Chain: [base] or [base_left]/[base_right] with
/// position and rotation (w x y z); [jointN] with axis, link_translation and
/// optional link_axis/link_angle_deg. Limits: [joint_limits_deg] jN = lower upper;
/// [velocity] joint_max_deg_s, tcp_max_mm_s, max_gap_s. Throws ConfigError.
KinematicChain load_chain(const std::string& path, transfer::Arm arm);
Limits load_limits(const std::string& path);

}  // namespace hdkit::feasibility
