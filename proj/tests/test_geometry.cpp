#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "hdkit/error.hpp"
#include "hdkit/geometry.hpp"
#include "oracles.hpp"

using namespace hdkit;
using namespace hdkit::geometry;

namespace {

RigidTransform random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  return {oracle::random_rotation(rng), Vec3(u(rng), u(rng), u(rng))};
}

void expect_near(const RigidTransform& a, const RigidTransform& b, double tol) {
  EXPECT_LE((a.rotation - b.rotation).cwiseAbs().maxCoeff(), tol);
  EXPECT_LE((a.translation - b.translation).cwiseAbs().maxCoeff(), tol);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an hdkit::Error";
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST(RigidTransform, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto t = random_transform(rng);
    expect_near(compose(t, invert(t)), RigidTransform::identity(), 1e-12);
    expect_near(compose(invert(t), t), RigidTransform::identity(), 1e-12);
  }
}

TEST(RigidTransform, ComposeMatchesMatrixProduct) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_transform(rng);
    const auto b = random_transform(rng);
    EXPECT_LE((compose(a, b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RigidTransform, QuaternionRoundTripKeepsNonNegativeW) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto t = random_transform(rng);
    const auto q = t.quaternion();
    EXPECT_GE(q(0), 0.0);
    EXPECT_NEAR(q.norm(), 1.0, 1e-12);
    expect_near(RigidTransform::from_quaternion(q, t.translation), t, 1e-12);
  }
}

TEST(RigidTransform, RejectsUnnormalizedQuaternion) {
  EXPECT_EQ(code_of([] { RigidTransform::from_quaternion(Eigen::Vector4d(1.1, 0, 0, 0)); }), ErrorCode::NotNormalized);
  EXPECT_NO_THROW(RigidTransform::from_quaternion(Eigen::Vector4d(1 + 5e-7, 0, 0, 0)));
}

TEST(RigidTransform, ValidityCheck) {
  RigidTransform t;
  EXPECT_TRUE(t.is_valid());
  t.rotation(0, 0) = -1;  // reflection
  EXPECT_FALSE(t.is_valid());
}

TEST(RotationLog, ExpLogRoundTrip) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Mat3 r = oracle::random_rotation(rng);
    EXPECT_LE((rotation_exp(rotation_log(r)) - r).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(rotation_exp(Vec3::Zero()), Mat3::Identity());
}

TEST(InterpolatePose, EndpointsAreExact) {
  std::mt19937_64 rng(5);
  const auto a = random_transform(rng);
  const auto b = random_transform(rng);
  const auto p0 = interpolate_pose(a, b, 0.0);
  const auto p1 = interpolate_pose(a, b, 1.0);
  EXPECT_EQ(p0.rotation, a.rotation);
  EXPECT_EQ(p0.translation, a.translation);
  EXPECT_EQ(p1.rotation, b.rotation);
  EXPECT_EQ(p1.translation, b.translation);
}

TEST(InterpolatePose, ConstantAngularVelocity) {
  const auto a = RigidTransform::identity();
  auto b = RigidTransform::from_axis_angle(Vec3::UnitZ(), 1.2);
  b.translation = Vec3(1, 2, 3);
  for (double s : {0.1, 0.25, 0.5, 0.9}) {
    const auto p = interpolate_pose(a, b, s);
    EXPECT_NEAR(rotation_angle_between(a.rotation, p.rotation), 1.2 * s, 1e-12);
    EXPECT_LE((p.translation - s * b.translation).norm(), 1e-12);
  }
}

TEST(InterpolatePose, Errors) {
  const auto a = RigidTransform::identity();
  const auto flip = RigidTransform::from_axis_angle(Vec3::UnitX(), std::numbers::pi);
  EXPECT_EQ(code_of([&] { interpolate_pose(a, flip, 0.5); }), ErrorCode::AntipodalRotation);
  EXPECT_EQ(code_of([&] { interpolate_pose(a, a, 1.5); }), ErrorCode::InvalidInput);
}

TEST(Kabsch, RecoversRandomTransforms) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = random_transform(rng);
    const int n = 3 + trial % 8;
    std::vector<Vec3> src, dst;
    for (int i = 0; i < n; ++i) {
      src.emplace_back(u(rng), u(rng), u(rng));
      dst.push_back(t.apply(src.back()));
    }
    const auto a = kabsch_align(src, dst);
    expect_near(a.transform, t, 1e-9);
    EXPECT_LT(a.rms_error, 1e-12);
    EXPECT_TRUE(a.transform.is_valid());
  }
}

TEST(Kabsch, PlanarPointsNeverReflect) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_transform(rng);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 5; ++i) {
      src.emplace_back(u(rng), u(rng), 0.0);
      dst.push_back(t.apply(src.back()));
    }
    const auto a = kabsch_align(src, dst);
    EXPECT_NEAR(a.transform.rotation.determinant(), 1.0, 1e-12);
    expect_near(a.transform, t, 1e-9);
  }
}

TEST(Kabsch, ZeroWeightIgnoresOutlier) {
  std::mt19937_64 rng(8);
  const auto t = random_transform(rng);
  PointSet src{{Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0, 0.1, 0), Vec3(0, 0, 0.1), Vec3(0.05, 0.05, 0.05)}, {1, 1, 1, 1, 0}};
  PointSet dst;
  for (const auto& p : src.points) dst.points.push_back(t.apply(p));
  dst.points.back() += Vec3(0.5, 0, 0);
  const auto a = kabsch_align(src, dst);
  expect_near(a.transform, t, 1e-9);
}

TEST(Kabsch, WeightedRmsMatchesDefinition) {
  PointSet src{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {1, 2, 3, 4}};
  PointSet dst{{Vec3(0.01, 0, 0), Vec3(1, 0.02, 0), Vec3(0, 1, -0.01), Vec3(0, 0, 1.03)}, {}};
  const auto a = kabsch_align(src, dst);
  double sq = 0;
  for (std::size_t i = 0; i < 4; ++i) sq += src.weights[i] * (a.transform.apply(src.points[i]) - dst.points[i]).squaredNorm();
  EXPECT_NEAR(a.rms_error, std::sqrt(sq / 10.0), 1e-15);
}

TEST(Kabsch, DegenerateInputs) {
  std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
  EXPECT_EQ(code_of([&] { kabsch_align(two, two); }), ErrorCode::DegenerateConfiguration);
  EXPECT_EQ(code_of([&] { kabsch_align(line, line); }), ErrorCode::DegenerateConfiguration);
  std::vector<Vec3> three{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  EXPECT_EQ(code_of([&] { kabsch_align(three, two); }), ErrorCode::InvalidInput);
}

TEST(Kabsch, EquivariantUnderWorldTransform) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.1, 0.1), n(-1e-3, 1e-3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_transform(rng);
    const auto world = random_transform(rng);
    std::vector<Vec3> src, dst, moved;
    for (int i = 0; i < 6; ++i) {
      src.emplace_back(u(rng), u(rng), u(rng));
      dst.push_back(t.apply(src.back()) + Vec3(n(rng), n(rng), n(rng)));
      moved.push_back(world.apply(dst.back()));
    }
    const auto a = kabsch_align(src, dst);
    const auto b = kabsch_align(src, moved);
    expect_near(b.transform, compose(world, a.transform), 1e-9);
    EXPECT_NEAR(a.rms_error, b.rms_error, 1e-12);
  }
}

TEST(CenteredRank, Classifies) {
  std::vector<Vec3> point{Vec3(1, 1, 1), Vec3(1, 1, 1)};
  std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2)};
  std::vector<Vec3> plane{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  std::vector<Vec3> solid{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  EXPECT_EQ(centered_rank(point), 0);
  EXPECT_EQ(centered_rank(line), 1);
  EXPECT_EQ(centered_rank(plane), 2);
  EXPECT_EQ(centered_rank(solid), 3);
}

TEST(Kabsch, TetrahedronIdentity) {
  std::vector<Vec3> tet{Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  const auto a = kabsch_align(tet, tet);
  expect_near(a.transform, RigidTransform::identity(), 1e-12);
  EXPECT_LT(a.rms_error, 1e-12);
}

TEST(Kabsch, QuarterTurnAboutZ) {
  std::vector<Vec3> src{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  std::vector<Vec3> dst;
  for (const auto& p : src) dst.emplace_back(-p.y(), p.x(), p.z());
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const auto a = kabsch_align(src, dst);
  EXPECT_LE((a.transform.rotation - expected).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(a.rms_error, 1e-12);
}

TEST(Kabsch, NoisyRecoveryWithinBounds) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::normal_distribution<double> noise(0, 1e-4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_transform(rng);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 8; ++i) {
      src.emplace_back(u(rng), u(rng), u(rng));
      dst.push_back(t.apply(src.back()) + Vec3(noise(rng), noise(rng), noise(rng)));
    }
    const auto a = kabsch_align(src, dst);
    EXPECT_LT((a.transform.translation - t.translation).norm(), 5e-4);
    EXPECT_LE(a.rms_error, 5e-4);
  }
}

TEST(InterpolatePose, GeodesicMidpoint) {
  const auto b = RigidTransform::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
  const auto mid = interpolate_pose(RigidTransform::identity(), b, 0.5);
  const auto expected = RigidTransform::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 4);
  expect_near(mid, expected, 1e-12);
}

TEST(InterpolatePose, AngleRatioOnRandomPairs) {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_transform(rng);
    const auto b = random_transform(rng);
    const double total = rotation_angle_between(a.rotation, b.rotation);
    if (total > std::numbers::pi - 1e-6) continue;
    const auto p = interpolate_pose(a, b, 0.3);
    EXPECT_NEAR(rotation_angle_between(a.rotation, p.rotation), 0.3 * total, 1e-9);
  }
}

TEST(Compose, SequentialApplication) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_transform(rng);
    const auto b = random_transform(rng);
    const Vec3 p(u(rng), u(rng), u(rng));
    EXPECT_LE((compose(a, b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
  }
  const auto t = random_transform(rng);
  expect_near(compose(RigidTransform::identity(), t), t, 0.0);
}
