#include "hdkit/feasibility.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <future>
#include <numbers>
#include <sstream>

#include "hdkit/error.hpp"

namespace hdkit::feasibility {
namespace {

constexpr double kTimelineSlack = 1e-9;  // s
constexpr double kNullThreshold = 1e-6;  // relative singular value treated as null

RigidTransform joint_rotation(const Joint& j, double q) { return RigidTransform::from_axis_angle(j.axis, q); }

}  // namespace

void KinematicChain::validate() const {
  if (!base.is_valid()) throw Error(ErrorCode::InvalidInput, "chain base is not a rigid transform");
  for (int i = 0; i < kJoints; ++i) {
    const auto& j = joints[static_cast<std::size_t>(i)];
    if (!j.axis.allFinite() || std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidInput, "joint " + std::to_string(i + 1) + " axis is not unit length");
    }
    if (!j.link.is_valid()) throw Error(ErrorCode::InvalidInput, "joint " + std::to_string(i + 1) + " link is not rigid");
  }
}

double KinematicChain::reach() const {
  double r = 0.0;
  for (const auto& j : joints) r += j.link.translation.norm();
  return r;
}

KinematicChain KinematicChain::test_chain(const RigidTransform& base) {
  KinematicChain c;
  c.base = base;
  const std::array<Vec3, kJoints> axes{Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitZ(), Vec3::UnitY(),
                                       Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitZ()};
  const std::array<double, kJoints> lengths{0.2, 0.2, 0.2, 0.2, 0.1, 0.05, 0.05};
  for (std::size_t i = 0; i < axes.size(); ++i) {
    c.joints[i].axis = axes[i];
    c.joints[i].link = RigidTransform::from_translation(Vec3(0, 0, lengths[i]));
  }
  c.joints[3].link = RigidTransform::from_axis_angle(Vec3::UnitY(), std::numbers::pi / 2);
  c.joints[3].link.translation = Vec3(lengths[3], 0, 0);
  return c;
}

void JointLimits::validate() const {
  for (int i = 0; i < kJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!std::isfinite(lower_deg[k]) || !std::isfinite(upper_deg[k]) || !(lower_deg[k] < upper_deg[k])) {
      throw Error(ErrorCode::ConfigError, "joint " + std::to_string(i + 1) + " limits need lower < upper");
    }
  }
}

void VelocityLimits::validate() const {
  if (!(joint_max_deg_s > 0 && tcp_max_mm_s > 0 && max_gap_s > 0)) {
    throw Error(ErrorCode::ConfigError, "velocity limits and max gap must be positive");
  }
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::IkFailure: return "ik_failure";
    case Status::SoftLimit: return "soft_limit";
    case Status::JointOverspeed: return "joint_overspeed";
    case Status::TcpOverspeed: return "tcp_overspeed";
    case Status::CommGap: return "comm_gap";
  }
  return "unknown";
}

RigidTransform forward_kinematics(const KinematicChain& chain, const JointVector& q) {
  RigidTransform t = chain.base;
  for (int i = 0; i < kJoints; ++i) {
    const auto& j = chain.joints[static_cast<std::size_t>(i)];
    t = geometry::compose(geometry::compose(t, joint_rotation(j, q(i))), j.link);
  }
  return t;
}

Eigen::Matrix<double, 6, kJoints> jacobian(const KinematicChain& chain, const JointVector& q) {
  std::array<Vec3, kJoints> axis_w, origin_w;
  RigidTransform t = chain.base;
  for (int i = 0; i < kJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    axis_w[k] = t.rotation * chain.joints[k].axis;
    origin_w[k] = t.translation;
    t = geometry::compose(geometry::compose(t, joint_rotation(chain.joints[k], q(i))), chain.joints[k].link);
  }
  Eigen::Matrix<double, 6, kJoints> jac;
  for (int i = 0; i < kJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    jac.col(i).head<3>() = axis_w[k].cross(t.translation - origin_w[k]);
    jac.col(i).tail<3>() = axis_w[k];
  }
  return jac;
}

IkResult solve_ik(const KinematicChain& chain, const RigidTransform& target, const JointVector& seed,
                  const IkOptions& options) {
  if (!seed.allFinite()) throw Error(ErrorCode::InvalidInput, "IK seed must be finite");
  IkResult r;
  r.q = seed;
  const double lambda2 = options.damping * options.damping;
  for (;;) {
    const RigidTransform fk = forward_kinematics(chain, r.q);
    Eigen::Matrix<double, 6, 1> e;
    e.head<3>() = target.translation - fk.translation;
    e.tail<3>() = geometry::rotation_log(target.rotation * fk.rotation.transpose());
    r.position_error = e.head<3>().norm();
    r.rotation_error = e.tail<3>().norm();
    if (!e.allFinite()) break;

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian(chain, r.q), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const Eigen::MatrixXd& u = svd.matrixU();
    const Eigen::MatrixXd& v = svd.matrixV();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;

    JointVector step = JointVector::Zero();
    JointVector pull = JointVector::Zero();
    const JointVector toward_seed = seed - r.q;
    for (int k = 0; k < kJoints; ++k) {
      const double s = k < sv.size() ? sv(k) : 0.0;
      if (s > kNullThreshold * smax) {
        step += v.col(k) * (s / (s * s + lambda2)) * u.col(k).dot(e);
      } else {
        pull += v.col(k) * v.col(k).dot(toward_seed);
      }
    }
    if (r.position_error < options.convergence && r.rotation_error < options.convergence &&
        pull.norm() < options.convergence) {
      break;
    }
    if (r.iterations >= options.max_iterations) break;

    step += pull;
    const double biggest = step.cwiseAbs().maxCoeff();
    if (biggest > options.max_step) step *= options.max_step / biggest;
    r.q += step;
    ++r.iterations;
  }
  r.converged = r.position_error < options.position_tolerance && r.rotation_error < options.rotation_tolerance;
  return r;
}

namespace {

void check_motion(const KinematicChain& chain, const Limits& limits, const std::optional<PreviousFrame>& prev, double t,
                  const JointVector& q, FrameVerdict& verdict) {
  for (int i = 0; i < kJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double lo = deg2rad(limits.joints.lower_deg[k]);
    const double hi = deg2rad(limits.joints.upper_deg[k]);
    if (q(i) < lo || q(i) > hi) {
      const double bound = q(i) < lo ? limits.joints.lower_deg[k] : limits.joints.upper_deg[k];
      verdict.violations.push_back({Status::SoftLimit, i, q(i) * 180.0 / std::numbers::pi, bound});
    }
  }
  if (!prev) return;
  const double dt = t - prev->t;
  const double joint_max = deg2rad(limits.velocity.joint_max_deg_s);
  for (int i = 0; i < kJoints; ++i) {
    const double speed = std::abs(q(i) - prev->q(i)) / dt;
    if (speed > joint_max) {
      verdict.violations.push_back({Status::JointOverspeed, i, speed * 180.0 / std::numbers::pi,
                                    limits.velocity.joint_max_deg_s});
    }
  }
  const Vec3 p = forward_kinematics(chain, q).translation;
  const Vec3 p_prev = forward_kinematics(chain, prev->q).translation;
  const double tcp = (p - p_prev).norm() * 1000.0 / dt;
  if (tcp > limits.velocity.tcp_max_mm_s) {
    verdict.violations.push_back({Status::TcpOverspeed, -1, tcp, limits.velocity.tcp_max_mm_s});
  }
}

void check_gap(const Limits& limits, const std::optional<PreviousFrame>& prev, double t, FrameVerdict& verdict) {
  if (!std::isfinite(t)) throw Error(ErrorCode::InvalidInput, "non-finite frame time");
  if (!prev) return;
  const double since = t - prev->last_seen_t.value_or(prev->t);
  if (!(t > prev->t) || !(since > 0)) throw Error(ErrorCode::NonMonotonicTimestamps, "frame time does not advance");
  if (since > limits.velocity.max_gap_s) {
    verdict.violations.push_back({Status::CommGap, -1, since, limits.velocity.max_gap_s});
  }
}

void finish(FrameVerdict& verdict) {
  verdict.status = verdict.violations.empty() ? Status::Ok : verdict.violations.front().status;
}

}  // namespace

FrameCheck check_frame(const KinematicChain& chain, const Limits& limits, const std::optional<PreviousFrame>& prev,
                       double t, const RigidTransform& target, const IkOptions& ik) {
  FrameCheck out;
  check_gap(limits, prev, t, out.verdict);
  const IkResult solved = solve_ik(chain, target, prev ? prev->q : JointVector::Zero(), ik);
  out.q = solved.q;
  out.ik_solved = solved.converged;
  if (!solved.converged) {
    out.verdict.violations.push_back({Status::IkFailure, -1, solved.position_error, ik.position_tolerance});
  } else {
    check_motion(chain, limits, prev, t, solved.q, out.verdict);
  }
  finish(out.verdict);
  return out;
}

FrameCheck check_joint_frame(const KinematicChain& chain, const Limits& limits, const std::optional<PreviousFrame>& prev,
                             double t, const JointVector& q) {
  if (!q.allFinite()) throw Error(ErrorCode::InvalidInput, "joint configuration must be finite");
  FrameCheck out;
  out.q = q;
  out.ik_solved = true;
  check_gap(limits, prev, t, out.verdict);
  check_motion(chain, limits, prev, t, q, out.verdict);
  finish(out.verdict);
  return out;
}

namespace {

std::vector<FrameVerdict> validate_arm(const transfer::FlangeTrajectory& traj, const KinematicChain& chain,
                                       const Limits& limits) {
  std::vector<FrameVerdict> out;
  out.reserve(traj.samples.size());
  std::optional<PreviousFrame> prev;
  for (const auto& s : traj.samples) {
    FrameCheck fc = check_frame(chain, limits, prev, s.timestamp, s.pose);
    if (fc.ik_solved) {
      prev = PreviousFrame{s.timestamp, fc.q, std::nullopt};
    } else if (prev) {
      prev->last_seen_t = s.timestamp;
    }
    out.push_back(std::move(fc.verdict));
  }
  return out;
}

}  // namespace

EpisodeVerdict validate_episode(const transfer::FlangeTrajectory& left, const transfer::FlangeTrajectory& right,
                                const KinematicChain& left_chain, const KinematicChain& right_chain,
                                const Limits& limits) {
  if (left.samples.size() != right.samples.size()) {
    throw Error(ErrorCode::TimelineMismatch, "left and right trajectories have different sample counts");
  }
  for (std::size_t i = 0; i < left.samples.size(); ++i) {
    if (std::abs(left.samples[i].timestamp - right.samples[i].timestamp) > kTimelineSlack) {
      throw Error(ErrorCode::TimelineMismatch, "left and right timestamps differ at frame " + std::to_string(i));
    }
  }
  left_chain.validate();
  right_chain.validate();
  limits.joints.validate();
  limits.velocity.validate();

  auto left_job = std::async(std::launch::async, validate_arm, std::cref(left), std::cref(left_chain), std::cref(limits));
  auto right_verdicts = validate_arm(right, right_chain, limits);
  auto left_verdicts = left_job.get();

  EpisodeVerdict ep;
  ep.log.reserve(2 * left_verdicts.size());
  for (std::size_t i = 0; i < left_verdicts.size(); ++i) {
    for (auto* arm : {&left_verdicts, &right_verdicts}) {
      const auto side = arm == &left_verdicts ? transfer::Arm::Left : transfer::Arm::Right;
      if (!(*arm)[i].ok() && !ep.first_invalid_frame) ep.first_invalid_frame = i;
      ep.log.push_back({i, side, std::move((*arm)[i])});
    }
  }
  ep.valid = !ep.first_invalid_frame.has_value();
  return ep;
}

namespace {

namespace pt = boost::property_tree;

std::vector<double> numbers(const std::string& text, std::size_t expected, const std::string& key) {
  std::istringstream in(text);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof() || out.size() != expected) {
    throw Error(ErrorCode::ConfigError, key + " needs " + std::to_string(expected) + " numbers, got '" + text + "'");
  }
  return out;
}

Vec3 vec3(const pt::ptree& section, const std::string& key, const std::string& where) {
  const auto text = section.get_optional<std::string>(key);
  if (!text) throw Error(ErrorCode::ConfigError, where + "." + key + " is missing");
  const auto v = numbers(*text, 3, where + "." + key);
  return {v[0], v[1], v[2]};
}

pt::ptree read(const std::string& path) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return tree;
}

}  // namespace

KinematicChain load_chain(const std::string& path, transfer::Arm arm) {
  const pt::ptree tree = read(path);
  KinematicChain chain;
  const std::string side_key = arm == transfer::Arm::Left ? "base_left" : "base_right";
  const auto base = tree.get_child_optional(side_key) ? tree.get_child_optional(side_key) : tree.get_child_optional("base");
  if (base) {
    Vec3 position = Vec3::Zero();
    Eigen::Vector4d rotation(1, 0, 0, 0);
    if (base->get_optional<std::string>("position")) position = vec3(*base, "position", side_key);
    if (const auto rot = base->get_optional<std::string>("rotation")) {
      const auto v = numbers(*rot, 4, side_key + ".rotation");
      rotation = Eigen::Vector4d(v[0], v[1], v[2], v[3]);
    }
    try {
      chain.base = RigidTransform::from_quaternion(rotation, position);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, std::string("base rotation: ") + e.what());
    }
  }
  for (int i = 0; i < kJoints; ++i) {
    const std::string name = "joint" + std::to_string(i + 1);
    const auto sec = tree.get_child_optional(name);
    if (!sec) throw Error(ErrorCode::ConfigError, "section [" + name + "] is missing");
    auto& j = chain.joints[static_cast<std::size_t>(i)];
    j.axis = vec3(*sec, "axis", name);
    if (!(j.axis.norm() > 0)) throw Error(ErrorCode::ConfigError, name + ".axis is zero");
    j.axis.normalize();
    double angle_deg = 0.0;
    if (sec->get_optional<std::string>("link_angle_deg")) {
      const auto parsed = sec->get_optional<double>("link_angle_deg");
      if (!parsed) throw Error(ErrorCode::ConfigError, name + ".link_angle_deg is not a number");
      angle_deg = *parsed;
    }
    const Vec3 link_axis = sec->get_optional<std::string>("link_axis") ? vec3(*sec, "link_axis", name) : Vec3::UnitZ();
    j.link = RigidTransform::from_axis_angle(link_axis, deg2rad(angle_deg));
    j.link.translation = vec3(*sec, "link_translation", name);
  }
  try {
    chain.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return chain;
}

Limits load_limits(const std::string& path) {
  const pt::ptree tree = read(path);
  Limits limits;
  const auto joints = tree.get_child_optional("joint_limits_deg");
  if (!joints) throw Error(ErrorCode::ConfigError, "section [joint_limits_deg] is missing");
  for (int i = 0; i < kJoints; ++i) {
    const std::string key = "j" + std::to_string(i + 1);
    const auto text = joints->get_optional<std::string>(key);
    if (!text) throw Error(ErrorCode::ConfigError, "joint limit " + key + " is missing");
    const auto v = numbers(*text, 2, key);
    limits.joints.lower_deg[static_cast<std::size_t>(i)] = v[0];
    limits.joints.upper_deg[static_cast<std::size_t>(i)] = v[1];
  }
  if (const auto vel = tree.get_child_optional("velocity")) {
    auto field = [&](const char* key, double& dst) {
      if (!vel->get_optional<std::string>(key)) return;
      const auto parsed = vel->get_optional<double>(key);
      if (!parsed) throw Error(ErrorCode::ConfigError, std::string("velocity.") + key + " is not a number");
      dst = *parsed;
    };
    field("joint_max_deg_s", limits.velocity.joint_max_deg_s);
    field("tcp_max_mm_s", limits.velocity.tcp_max_mm_s);
    field("max_gap_s", limits.velocity.max_gap_s);
  }
  limits.joints.validate();
  limits.velocity.validate();
  return limits;
}

}  // namespace hdkit::feasibility
