#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hdkit/error.hpp"
#include "hdkit/harness.hpp"

using namespace hdkit;
using namespace hdkit::harness;
using feasibility::Status;
using geometry::Vec3;
using transfer::Arm;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an hdkit::Error";
  return ErrorCode::InvalidInput;
}

Status status_at(const feasibility::EpisodeVerdict& v, std::size_t frame, Arm arm) {
  for (const auto& e : v.log) {
    if (e.frame == frame && e.arm == arm) return e.verdict.status;
  }
  ADD_FAILURE() << "no log entry for frame " << frame;
  return Status::Ok;
}

}  // namespace

TEST(MarkerStream, ZeroNoiseMatchesTransformedReferences) {
  const auto model = benchmark_model();
  const auto traj = benchmark_trajectory(50);
  const auto stream = generate_marker_stream(model, traj, NoiseProfile{}, 7);
  ASSERT_EQ(stream.frames.size(), 50u);
  for (std::size_t f = 0; f < 50; ++f) {
    ASSERT_EQ(stream.frames[f].observations.size(), model.size());
    EXPECT_DOUBLE_EQ(stream.frames[f].timestamp, f / 240.0);
    for (std::size_t i = 0; i < model.size(); ++i) {
      ASSERT_TRUE(stream.truth[f][i].has_value());
      EXPECT_EQ(stream.frames[f].observations[*stream.truth[f][i]], traj[f].apply(model.reference_positions()[i]));
    }
  }
}

TEST(MarkerStream, FullDropoutGivesEmptyFrames) {
  NoiseProfile p;
  p.dropout_prob = 1.0;
  const auto stream = generate_marker_stream(benchmark_model(), benchmark_trajectory(30), p, 8);
  for (std::size_t f = 0; f < stream.frames.size(); ++f) {
    EXPECT_TRUE(stream.frames[f].observations.empty());
    EXPECT_TRUE(std::none_of(stream.truth[f].begin(), stream.truth[f].end(), [](const auto& l) { return l.has_value(); }));
  }
}

TEST(MarkerStream, SeededRunsAreBitwiseIdentical) {
  NoiseProfile p = benchmark_profile();
  p.sigma = 2e-4;
  p.spurious_rate = 0.5;
  p.dropout_prob = 0.05;
  const auto a = generate_marker_stream(benchmark_model(), benchmark_trajectory(200), p, 9);
  const auto b = generate_marker_stream(benchmark_model(), benchmark_trajectory(200), p, 9);
  const auto c = generate_marker_stream(benchmark_model(), benchmark_trajectory(200), p, 10);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  bool differs = false;
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    EXPECT_EQ(a.frames[f].observations, b.frames[f].observations);
    EXPECT_EQ(a.truth[f], b.truth[f]);
    differs = differs || a.frames[f].observations != c.frames[f].observations;
  }
  EXPECT_TRUE(differs);
}

TEST(MarkerStream, BurstsRespectConcurrencyCap) {
  NoiseProfile p;
  p.burst_length = 5;
  p.burst_start_prob = 0.2;
  p.max_concurrent_occlusions = 2;
  const auto model = benchmark_model();
  const auto stream = generate_marker_stream(model, benchmark_trajectory(500), p, 11);
  std::size_t with_two = 0;
  for (const auto& labels : stream.truth) {
    const auto missing = std::count_if(labels.begin(), labels.end(), [](const auto& l) { return !l.has_value(); });
    EXPECT_LE(missing, 2);
    with_two += missing == 2 ? 1 : 0;
  }
  EXPECT_GT(with_two, 0u);
}

TEST(MarkerStream, ProfileValidation) {
  NoiseProfile p;
  p.dropout_prob = 1.5;
  EXPECT_EQ(code_of([&] { generate_marker_stream(benchmark_model(), benchmark_trajectory(3), p, 1); }),
            ErrorCode::InvalidInput);
}

TEST(TrackingExperiment, CleanStreamsBothSucceed) {
  const auto model = benchmark_model();
  const auto traj = benchmark_trajectory(120);
  EXPECT_EQ(tracking_experiment(model, traj, NoiseProfile{}, Method::MarkerOnly, 5, 1).success_rate, 1.0);
  EXPECT_EQ(tracking_experiment(model, traj, NoiseProfile{}, Method::ObjectBased, 5, 1).success_rate, 1.0);
}

TEST(TrackingExperiment, OcclusionBurstsSeparateMethods) {
  const auto model = benchmark_model();
  const auto traj = benchmark_trajectory(240);
  const auto profile = benchmark_profile();
  const auto object = tracking_experiment(model, traj, profile, Method::ObjectBased, 20, 100);
  const auto marker = tracking_experiment(model, traj, profile, Method::MarkerOnly, 20, 100);
  EXPECT_EQ(object.success_rate, 1.0);
  EXPECT_LT(marker.success_rate, 1.0);
  EXPECT_EQ(object.trials.size(), 20u);
  EXPECT_EQ(object.trials[3].seed, 103u);
}

TEST(TrackingExperiment, AdversarialSwap) {
  const auto c = adversarial_case();
  const auto stream = generate_marker_stream(c.model, c.trajectory, NoiseProfile{}, 3);
  EXPECT_EQ(first_identity_error(stream, label_marker_only(c.model, stream)), c.jump_frame);
  EXPECT_FALSE(first_identity_error(stream, label_object_based(c.model, stream)).has_value());
}

TEST(CleanEpisode, ValidatesAndIsDeterministic) {
  const auto arms = DualArm::test_setup();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ep = make_clean_episode(arms, seed);
    ASSERT_EQ(ep.left.samples.size(), 61u);
    ASSERT_EQ(ep.right.samples.size(), 61u);
    EXPECT_TRUE(feasibility::validate_episode(ep.left, ep.right, arms.left, arms.right, arms.limits).valid);
    const auto again = make_clean_episode(arms, seed);
    for (std::size_t k = 0; k < 61; ++k) {
      EXPECT_EQ(ep.left.samples[k].pose.translation, again.left.samples[k].pose.translation);
    }
  }
}

TEST(InjectViolation, EachKindIsFlaggedAtItsFrame) {
  const auto arms = DualArm::test_setup();
  const auto clean = make_clean_episode(arms, 42);
  struct Case {
    ViolationSpec spec;
    Status expected;
  };
  const std::vector<Case> cases{
      {{ViolationKind::TcpJump, 20, 0.010, Arm::Right}, Status::TcpOverspeed},
      {{ViolationKind::OutOfReach, 30, 3.0, Arm::Left}, Status::IkFailure},
      {{ViolationKind::JointLimitExcursion, 25, 5.0, Arm::Right}, Status::SoftLimit},
      {{ViolationKind::TimeGap, 40, 0.5, Arm::Right}, Status::CommGap},
  };
  for (const auto& c : cases) {
    const auto bad = inject_violation(clean, c.spec, arms);
    const auto v = feasibility::validate_episode(bad.left, bad.right, arms.left, arms.right, arms.limits);
    EXPECT_FALSE(v.valid) << to_string(c.spec.kind);
    EXPECT_EQ(v.first_invalid_frame, c.spec.frame) << to_string(c.spec.kind);
    EXPECT_EQ(status_at(v, c.spec.frame, c.spec.arm), c.expected) << to_string(c.spec.kind);
  }
}

TEST(InjectViolation, SmallJumpStaysValid) {
  const auto arms = DualArm::test_setup();
  const auto clean = make_clean_episode(arms, 43);
  const auto ep = inject_violation(clean, {ViolationKind::TcpJump, 20, 0.001, Arm::Left}, arms);
  EXPECT_TRUE(feasibility::validate_episode(ep.left, ep.right, arms.left, arms.right, arms.limits).valid);
}

TEST(InjectViolation, FrameRange) {
  const auto arms = DualArm::test_setup();
  const auto clean = make_clean_episode(arms, 44);
  EXPECT_EQ(code_of([&] { inject_violation(clean, {ViolationKind::TcpJump, 61, 0.01, Arm::Right}, arms); }),
            ErrorCode::FrameOutOfRange);
  EXPECT_EQ(code_of([&] { inject_violation(clean, {ViolationKind::TcpJump, 0, 0.01, Arm::Right}, arms); }),
            ErrorCode::FrameOutOfRange);
}

TEST(ValidityExperiment, RatesPerPopulation) {
  const std::vector<ViolationSpec> specs{{ViolationKind::TcpJump, 20, 0.01, Arm::Right},
                                         {ViolationKind::TimeGap, 40, 0.5, Arm::Right}};
  const auto r = validity_experiment(6, 6, specs, 500);
  EXPECT_EQ(r.accept_rate_clean, 1.0);
  EXPECT_EQ(r.reject_rate_corrupted, 1.0);
  ASSERT_EQ(r.episodes.size(), 12u);
  for (const auto& e : r.episodes) {
    if (e.corrupted) {
      EXPECT_TRUE(e.injected_frame_flagged);
    }
  }
  EXPECT_EQ(code_of([] { validity_experiment(0, 3, {}, 1); }), ErrorCode::InvalidInput);
}

TEST(Names, RoundTrip) {
  for (auto k : {ViolationKind::TcpJump, ViolationKind::JointLimitExcursion, ViolationKind::OutOfReach, ViolationKind::TimeGap}) {
    EXPECT_EQ(violation_from_string(to_string(k)), k);
  }
  EXPECT_EQ(method_from_string("marker_only"), Method::MarkerOnly);
  EXPECT_EQ(method_from_string("object_based"), Method::ObjectBased);
}
