#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hdkit/feasibility.hpp"
#include "hdkit/tracking.hpp"
#include "hdkit/transfer.hpp"

namespace hdkit::harness {

using geometry::RigidTransform;

/// Synthetic marker noise. Bursts occlude one marker for `burst_length`
/// consecutive frames; at most `max_concurrent_occlusions` bursts overlap.
struct NoiseProfile {
  double sigma = 0.0;              // m, isotropic Gaussian per coordinate
  double dropout_prob = 0.0;       // independent per marker per frame
  double spurious_rate = 0.0;      // mean extra points per frame (Poisson)
  int burst_length = 0;            // frames
  double burst_start_prob = 0.0;   // per marker per frame
  int max_concurrent_occlusions = 0;

  void validate() const;
};

/// truth[f][i] is the observation index of marker i in frame f, or nullopt when occluded.
using Labels = std::vector<std::optional<std::size_t>>;

struct MarkerStream {
  std::vector<tracking::MarkerFrame> frames;
  std::vector<Labels> truth;
};

/// Frames are pose · references plus noise, dropouts and spurious points,
/// shuffled. Deterministic in (inputs, seed). Frame timestamps are k / rate.
MarkerStream generate_marker_stream(const tracking::MarkerObjectModel& model, const std::vector<RigidTransform>& trajectory,
                                    const NoiseProfile& profile, std::uint64_t seed, double rate = 240.0);

enum class Method { MarkerOnly, ObjectBased };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Nearest-neighbour propagation from each marker's last labeled position,
/// gated at 5 mm, starting from the ground-truth labels of frame 0.
std::vector<Labels> label_marker_only(const tracking::MarkerObjectModel& model, const MarkerStream& stream);
/// Labels from the object-model tracker (no ground truth used).
std::vector<Labels> label_object_based(const tracking::MarkerObjectModel& model, const MarkerStream& stream);

/// True iff every visible marker carries its true observation and no occluded
/// marker is labeled, in every frame. Returns the first failing frame otherwise.
std::optional<std::size_t> first_identity_error(const MarkerStream& stream, const std::vector<Labels>& labels);

struct TrialOutcome {
  std::uint64_t seed = 0;
  bool success = false;
  std::optional<std::size_t> first_failure_frame;
};

struct TrackingReport {
  double success_rate = 0.0;
  std::vector<TrialOutcome> trials;
};

/// Trial k uses seed + k.
TrackingReport tracking_experiment(const tracking::MarkerObjectModel& model, const std::vector<RigidTransform>& trajectory,
                                   const NoiseProfile& profile, Method method, int trials, std::uint64_t seed);

/// Six-marker collector layout with all pairwise distances distinct.
tracking::MarkerObjectModel benchmark_model();
/// Smooth handheld-like motion (about 0.3-0.5 m/s) sampled at `rate`.
std::vector<RigidTransform> benchmark_trajectory(std::size_t frames, double rate = 240.0);
/// Occlusion bursts of 5 frames on up to 2 markers, sigma = 0.3 mm.
NoiseProfile benchmark_profile();

/// Model with two markers 8 mm apart and a trajectory whose single-frame jump
/// equals their offset, so nearest-neighbour labels swap for that frame.
struct AdversarialCase {
  tracking::MarkerObjectModel model;
  std::vector<RigidTransform> trajectory;
  std::size_t jump_frame = 0;
};
AdversarialCase adversarial_case();

struct Episode {
  transfer::FlangeTrajectory left;
  transfer::FlangeTrajectory right;
};

struct DualArm {
  feasibility::KinematicChain left;
  feasibility::KinematicChain right;
  feasibility::Limits limits;

  /// Test chain with bases at y = +/-0.35 m and the default limits.
  static DualArm test_setup();
};

/// Smooth joint-space motion around an in-limit nominal pose, scaled so joint
/// speed stays under 50% of the limit (2-norm) and TCP speed under 50%.
/// Flange poses come from forward kinematics.
Episode make_clean_episode(const DualArm& arms, std::uint64_t seed, double rate = 30.0, double duration = 2.0);

enum class ViolationKind { TcpJump, JointLimitExcursion, OutOfReach, TimeGap };
std::string to_string(ViolationKind k);
ViolationKind violation_from_string(const std::string& s);

/// magnitude: TcpJump meters (>= 0.01), OutOfReach radius from the base (m),
/// JointLimitExcursion degrees beyond the J4 upper limit, TimeGap seconds.
struct ViolationSpec {
  ViolationKind kind = ViolationKind::TcpJump;
  std::size_t frame = 1;
  double magnitude = 0.01;
  transfer::Arm arm = transfer::Arm::Right;
};

/// Applies exactly one corruption; other frames stay bit-identical (TimeGap
/// shifts the timestamps of every later frame on both arms). Throws FrameOutOfRange.
Episode inject_violation(const Episode& episode, const ViolationSpec& spec, const DualArm& arms);

struct EpisodeOutcome {
  std::uint64_t seed = 0;
  bool corrupted = false;
  std::optional<ViolationSpec> spec;
  bool valid = false;
  std::optional<std::size_t> first_invalid_frame;
  bool injected_frame_flagged = false;
};

struct ValidityReport {
  double accept_rate_clean = 0.0;
  double reject_rate_corrupted = 0.0;
  std::vector<EpisodeOutcome> episodes;
};

/// Clean episode k uses seed + k; corrupted episode k uses seed + n_clean + k
/// and cycles through `specs`.
ValidityReport validity_experiment(int n_clean, int n_corrupted, const std::vector<ViolationSpec>& specs,
                                   std::uint64_t seed, const DualArm& arms = DualArm::test_setup());

}  // namespace hdkit::harness
