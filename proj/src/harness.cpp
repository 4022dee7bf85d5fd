#include "hdkit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <tuple>

#include "hdkit/error.hpp"

namespace hdkit::harness {
namespace {

using geometry::Vec3;
using tracking::MarkerFrame;
using tracking::MarkerObjectModel;

constexpr double kSpuriousHalfBox = 0.2;  // m, around the object's position
constexpr double kSpeedFraction = 0.5;    // clean episodes use at most this share of each speed limit

double wave(double amp, double freq, double phase, double t) {
  return amp * std::sin(2.0 * std::numbers::pi * freq * t + phase);
}

}  // namespace

void NoiseProfile::validate() const {
  auto prob = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!(std::isfinite(sigma) && sigma >= 0)) throw Error(ErrorCode::InvalidInput, "sigma must be >= 0");
  if (!prob(dropout_prob) || !prob(burst_start_prob)) throw Error(ErrorCode::InvalidInput, "probabilities must lie in [0, 1]");
  if (!(std::isfinite(spurious_rate) && spurious_rate >= 0)) throw Error(ErrorCode::InvalidInput, "spurious rate must be >= 0");
  if (burst_length < 0 || max_concurrent_occlusions < 0) throw Error(ErrorCode::InvalidInput, "burst settings must be >= 0");
}

MarkerStream generate_marker_stream(const MarkerObjectModel& model, const std::vector<RigidTransform>& trajectory,
                                    const NoiseProfile& profile, std::uint64_t seed, double rate) {
  profile.validate();
  if (!(rate > 0)) throw Error(ErrorCode::InvalidInput, "rate must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, profile.sigma > 0 ? profile.sigma : 1.0);
  std::poisson_distribution<int> spurious(profile.spurious_rate > 0 ? profile.spurious_rate : 1.0);
  std::uniform_real_distribution<double> box(-kSpuriousHalfBox, kSpuriousHalfBox);

  const std::size_t m = model.size();
  std::vector<int> burst_left(m, 0);
  MarkerStream out;
  out.frames.reserve(trajectory.size());
  out.truth.reserve(trajectory.size());

  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    const RigidTransform& pose = trajectory[f];
    int active = static_cast<int>(std::count_if(burst_left.begin(), burst_left.end(), [](int b) { return b > 0; }));
    if (profile.burst_length > 0 && profile.burst_start_prob > 0) {
      for (std::size_t i = 0; i < m; ++i) {
        if (burst_left[i] > 0 || active >= profile.max_concurrent_occlusions) continue;
        if (unit(rng) < profile.burst_start_prob) {
          burst_left[i] = profile.burst_length;
          ++active;
        }
      }
    }

    std::vector<Vec3> points;
    std::vector<std::optional<std::size_t>> owner;  // marker index per point, nullopt for spurious
    for (std::size_t i = 0; i < m; ++i) {
      if (burst_left[i] > 0) {
        --burst_left[i];
        continue;
      }
      if (profile.dropout_prob > 0 && unit(rng) < profile.dropout_prob) continue;
      Vec3 p = pose.apply(model.reference_positions()[i]);
      if (profile.sigma > 0) p += Vec3(noise(rng), noise(rng), noise(rng));
      points.push_back(p);
      owner.push_back(i);
    }
    const int extra = profile.spurious_rate > 0 ? spurious(rng) : 0;
    for (int s = 0; s < extra; ++s) {
      points.push_back(pose.translation + Vec3(box(rng), box(rng), box(rng)));
      owner.push_back(std::nullopt);
    }

    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    MarkerFrame frame;
    frame.timestamp = static_cast<double>(f) / rate;
    Labels truth(m);
    for (std::size_t k = 0; k < order.size(); ++k) {
      frame.observations.push_back(points[order[k]]);
      if (owner[order[k]]) truth[*owner[order[k]]] = k;
    }
    out.frames.push_back(std::move(frame));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

std::string to_string(Method m) { return m == Method::MarkerOnly ? "marker_only" : "object_based"; }

Method method_from_string(const std::string& s) {
  if (s == "marker_only") return Method::MarkerOnly;
  if (s == "object_based") return Method::ObjectBased;
  throw Error(ErrorCode::InvalidInput, "unknown tracking method '" + s + "'");
}

std::vector<Labels> label_marker_only(const MarkerObjectModel& model, const MarkerStream& stream) {
  std::vector<Labels> out;
  if (stream.frames.empty()) return out;
  const std::size_t m = model.size();
  std::vector<std::optional<Vec3>> last(m);
  out.push_back(stream.truth.front());
  for (std::size_t i = 0; i < m; ++i) {
    if (stream.truth.front()[i]) last[i] = stream.frames.front().observations[*stream.truth.front()[i]];
  }

  for (std::size_t f = 1; f < stream.frames.size(); ++f) {
    const auto& obs = stream.frames[f].observations;
    struct Pair {
      double dist;
      std::size_t marker;
      std::size_t obs;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < m; ++i) {
      if (!last[i]) continue;
      for (std::size_t j = 0; j < obs.size(); ++j) {
        const double d = (obs[j] - *last[i]).norm();
        if (d <= tracking::kGateRadius) pairs.push_back({d, i, j});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      return a.dist != b.dist ? a.dist < b.dist : std::tie(a.marker, a.obs) < std::tie(b.marker, b.obs);
    });
    Labels labels(m);
    std::vector<bool> used(obs.size(), false);
    for (const auto& p : pairs) {
      if (labels[p.marker] || used[p.obs]) continue;
      labels[p.marker] = p.obs;
      used[p.obs] = true;
      last[p.marker] = obs[p.obs];
    }
    out.push_back(std::move(labels));
  }
  return out;
}

std::vector<Labels> label_object_based(const MarkerObjectModel& model, const MarkerStream& stream) {
  tracking::MarkerTracker tracker(model);
  std::vector<Labels> out;
  out.reserve(stream.frames.size());
  for (const auto& frame : stream.frames) out.push_back(tracker.track(frame).assignment.mapping);
  return out;
}

std::optional<std::size_t> first_identity_error(const MarkerStream& stream, const std::vector<Labels>& labels) {
  if (labels.size() != stream.truth.size()) return 0;
  for (std::size_t f = 0; f < labels.size(); ++f) {
    if (labels[f] != stream.truth[f]) return f;
  }
  return std::nullopt;
}

TrackingReport tracking_experiment(const MarkerObjectModel& model, const std::vector<RigidTransform>& trajectory,
                                   const NoiseProfile& profile, Method method, int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::InvalidInput, "trials must be >= 1");
  TrackingReport report;
  int successes = 0;
  for (int k = 0; k < trials; ++k) {
    const std::uint64_t trial_seed = seed + static_cast<std::uint64_t>(k);
    const MarkerStream stream = generate_marker_stream(model, trajectory, profile, trial_seed);
    const auto labels = method == Method::MarkerOnly ? label_marker_only(model, stream) : label_object_based(model, stream);
    TrialOutcome t;
    t.seed = trial_seed;
    t.first_failure_frame = first_identity_error(stream, labels);
    t.success = !t.first_failure_frame;
    successes += t.success ? 1 : 0;
    report.trials.push_back(t);
  }
  report.success_rate = static_cast<double>(successes) / trials;
  return report;
}

MarkerObjectModel benchmark_model() {
  return MarkerObjectModel({"R1", "R2", "R3", "R4", "R5", "R6"},
                           {Vec3(0.000, 0.000, 0.000), Vec3(0.045, 0.012, 0.000), Vec3(0.083, -0.021, 0.004),
                            Vec3(0.031, 0.062, 0.011), Vec3(0.097, 0.048, -0.006), Vec3(0.012, 0.101, 0.021)});
}

std::vector<RigidTransform> benchmark_trajectory(std::size_t frames, double rate) {
  std::vector<RigidTransform> out;
  out.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = static_cast<double>(k) / rate;
    RigidTransform pose;
    pose.translation = Vec3(0.4 + wave(0.12, 0.5, 0.0, t), wave(0.08, 0.6, 1.0, t), 0.3 + wave(0.04, 0.8, 0.5, t));
    pose.rotation = geometry::rotation_exp(Vec3(wave(0.5, 0.3, 0.2, t), wave(0.4, 0.25, 1.1, t), 0.6 + wave(0.3, 0.2, 0.0, t)));
    out.push_back(pose);
  }
  return out;
}

NoiseProfile benchmark_profile() {
  NoiseProfile p;
  p.sigma = 0.3e-3;
  p.burst_length = 5;
  p.burst_start_prob = 0.002;
  p.max_concurrent_occlusions = 2;
  return p;
}

AdversarialCase adversarial_case() {
  AdversarialCase c{MarkerObjectModel({"A1", "A2", "A3", "A4", "A5"},
                                      {Vec3(0.000, 0.000, 0.000), Vec3(0.008, 0.000, 0.000), Vec3(0.050, 0.030, 0.000),
                                       Vec3(-0.020, 0.060, 0.010), Vec3(0.070, -0.040, 0.020)}),
                    {},
                    10};
  const Vec3 offset = c.model.reference_positions()[1] - c.model.reference_positions()[0];
  for (std::size_t k = 0; k < 20; ++k) {
    RigidTransform pose = RigidTransform::from_translation(Vec3(0.3, 0.0005 * static_cast<double>(k), 0.2));
    if (k == c.jump_frame) pose.translation += offset;
    c.trajectory.push_back(pose);
  }
  return c;
}

DualArm DualArm::test_setup() {
  return {feasibility::KinematicChain::test_chain(RigidTransform::from_translation(Vec3(0, 0.35, 0))),
          feasibility::KinematicChain::test_chain(RigidTransform::from_translation(Vec3(0, -0.35, 0))),
          feasibility::Limits{}};
}

Episode make_clean_episode(const DualArm& arms, std::uint64_t seed, double rate, double duration) {
  if (!(rate > 0) || !(duration > 0)) throw Error(ErrorCode::InvalidInput, "rate and duration must be positive");
  using feasibility::JointVector;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset(-0.3, 0.3);
  std::uniform_real_distribution<double> amplitude(0.05, 0.2);
  std::uniform_real_distribution<double> frequency(0.2, 0.8);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  const auto n = static_cast<std::size_t>(std::floor(duration * rate)) + 1;
  const double dt = 1.0 / rate;
  const double joint_cap = kSpeedFraction * feasibility::deg2rad(arms.limits.velocity.joint_max_deg_s);
  const double tcp_cap = kSpeedFraction * arms.limits.velocity.tcp_max_mm_s;

  auto build = [&](const feasibility::KinematicChain& chain, transfer::Arm arm) {
    JointVector nominal(0.0, 0.3, 0.0, -0.6, 0.0, 0.5, 0.0);
    JointVector amp, freq, ph;
    for (int j = 0; j < feasibility::kJoints; ++j) {
      nominal(j) += offset(rng);
      amp(j) = amplitude(rng);
      freq(j) = frequency(rng);
      ph(j) = phase(rng);
    }
    std::vector<JointVector> qs(n);
    std::vector<RigidTransform> poses(n);
    for (double scale = 1.0;; scale *= 0.8) {
      for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        for (int j = 0; j < feasibility::kJoints; ++j) qs[k](j) = nominal(j) + wave(scale * amp(j), freq(j), ph(j), t);
        poses[k] = feasibility::forward_kinematics(chain, qs[k]);
      }
      double joint_speed = 0.0, tcp_speed = 0.0;
      for (std::size_t k = 1; k < n; ++k) {
        joint_speed = std::max(joint_speed, (qs[k] - qs[k - 1]).norm() / dt);
        tcp_speed = std::max(tcp_speed, (poses[k].translation - poses[k - 1].translation).norm() * 1000.0 / dt);
      }
      if (joint_speed <= joint_cap && tcp_speed <= tcp_cap) break;
    }
    const double w0 = 0.03 + 0.02 * std::uniform_real_distribution<double>(0, 1)(rng);
    transfer::FlangeTrajectory traj;
    traj.rate = rate;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * dt;
      traj.samples.push_back({t, poses[k], w0 + wave(0.01, 0.5, 0.0, t), arm});
    }
    return traj;
  };
  Episode ep;
  ep.left = build(arms.left, transfer::Arm::Left);
  ep.right = build(arms.right, transfer::Arm::Right);
  return ep;
}

std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::TcpJump: return "tcp_jump";
    case ViolationKind::JointLimitExcursion: return "joint_limit_excursion";
    case ViolationKind::OutOfReach: return "out_of_reach";
    case ViolationKind::TimeGap: return "time_gap";
  }
  return "unknown";
}

ViolationKind violation_from_string(const std::string& s) {
  for (auto k : {ViolationKind::TcpJump, ViolationKind::JointLimitExcursion, ViolationKind::OutOfReach, ViolationKind::TimeGap}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidInput, "unknown violation kind '" + s + "'");
}

Episode inject_violation(const Episode& episode, const ViolationSpec& spec, const DualArm& arms) {
  const std::size_t n = std::min(episode.left.samples.size(), episode.right.samples.size());
  if (spec.frame >= n) {
    throw Error(ErrorCode::FrameOutOfRange, "frame " + std::to_string(spec.frame) + " outside episode of " +
                                                std::to_string(n) + " frames");
  }
  const bool needs_prev = spec.kind == ViolationKind::TcpJump || spec.kind == ViolationKind::TimeGap;
  if (needs_prev && spec.frame == 0) {
    throw Error(ErrorCode::FrameOutOfRange, to_string(spec.kind) + " needs a preceding frame");
  }
  if (!std::isfinite(spec.magnitude) || spec.magnitude < 0) throw Error(ErrorCode::InvalidInput, "magnitude must be >= 0");

  Episode out = episode;
  const bool left = spec.arm == transfer::Arm::Left;
  auto& samples = left ? out.left.samples : out.right.samples;
  const auto& chain = left ? arms.left : arms.right;
  auto& target = samples[spec.frame].pose;

  switch (spec.kind) {
    case ViolationKind::TcpJump: {
      Vec3 dir = target.translation - samples[spec.frame - 1].pose.translation;
      dir = dir.norm() > 1e-12 ? Vec3(dir.normalized()) : Vec3::UnitX();
      target.translation += spec.magnitude * dir;
      break;
    }
    case ViolationKind::OutOfReach: {
      Vec3 dir = target.translation - chain.base.translation;
      dir = dir.norm() > 1e-12 ? Vec3(dir.normalized()) : Vec3::UnitX();
      target.translation = chain.base.translation + spec.magnitude * dir;
      break;
    }
    case ViolationKind::JointLimitExcursion: {
      // Solve the clean prefix the way the validator does, then push J4 past its upper limit.
      feasibility::JointVector q = feasibility::JointVector::Zero();
      for (std::size_t k = 0; k <= spec.frame; ++k) {
        const auto r = feasibility::solve_ik(chain, samples[k].pose, q);
        if (r.converged) q = r.q;
      }
      q(3) = feasibility::deg2rad(arms.limits.joints.upper_deg[3] + spec.magnitude);
      target = feasibility::forward_kinematics(chain, q);
      break;
    }
    case ViolationKind::TimeGap:
      for (auto* traj : {&out.left.samples, &out.right.samples}) {
        for (std::size_t k = spec.frame; k < traj->size(); ++k) (*traj)[k].timestamp += spec.magnitude;
      }
      break;
  }
  return out;
}

ValidityReport validity_experiment(int n_clean, int n_corrupted, const std::vector<ViolationSpec>& specs,
                                   std::uint64_t seed, const DualArm& arms) {
  if (n_clean < 0 || n_corrupted < 0 || n_clean + n_corrupted < 1) {
    throw Error(ErrorCode::InvalidInput, "episode counts must be nonnegative and not both zero");
  }
  if (n_corrupted > 0 && specs.empty()) throw Error(ErrorCode::InvalidInput, "corrupted episodes need violation specs");
  ValidityReport report;
  int accepted = 0, rejected = 0;
  for (int k = 0; k < n_clean + n_corrupted; ++k) {
    EpisodeOutcome o;
    o.seed = seed + static_cast<std::uint64_t>(k);
    o.corrupted = k >= n_clean;
    Episode ep = make_clean_episode(arms, o.seed);
    if (o.corrupted) {
      o.spec = specs[static_cast<std::size_t>(k - n_clean) % specs.size()];
      ep = inject_violation(ep, *o.spec, arms);
    }
    const auto verdict = feasibility::validate_episode(ep.left, ep.right, arms.left, arms.right, arms.limits);
    o.valid = verdict.valid;
    o.first_invalid_frame = verdict.first_invalid_frame;
    if (o.spec) {
      o.injected_frame_flagged = std::any_of(verdict.log.begin(), verdict.log.end(), [&](const auto& e) {
        return e.frame == o.spec->frame && !e.verdict.ok();
      });
      rejected += o.valid ? 0 : 1;
    } else {
      accepted += o.valid ? 1 : 0;
    }
    report.episodes.push_back(std::move(o));
  }
  report.accept_rate_clean = n_clean > 0 ? static_cast<double>(accepted) / n_clean : 0.0;
  report.reject_rate_corrupted = n_corrupted > 0 ? static_cast<double>(rejected) / n_corrupted : 0.0;
  return report;
}

}  // namespace hdkit::harness
