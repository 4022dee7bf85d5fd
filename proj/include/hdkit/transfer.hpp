#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hdkit/geometry.hpp"

namespace hdkit::transfer {

using geometry::RigidTransform;

enum class Source { Mocap240Hz, Vr100Hz };
enum class Arm { Left, Right };

std::string to_string(Source s);
std::string to_string(Arm a);
Arm arm_from_string(const std::string& s);

/// Tracked-frame pose in world coordinates at a timestamp (seconds).
struct PoseSample {
  double timestamp = 0.0;
  RigidTransform pose;
  Source source = Source::Mocap240Hz;
};

struct WidthSample {
  double timestamp = 0.0;
  double width = 0.0;  // m
};

struct FlangeSample {
  double timestamp = 0.0;
  RigidTransform pose;
  double width = 0.0;  // m
  Arm arm = Arm::Right;
};

struct FlangeTrajectory {
  double rate = 30.0;  // Hz
  std::vector<FlangeSample> samples;

  /// Throws InvalidInput when the timestep is not uniform within 1e-9 s or a width is negative.
  void validate() const;
};

inline constexpr double kDefaultRate = 30.0;

/// flange = tracked ∘ offset
RigidTransform to_flange(const PoseSample& tracked, const RigidTransform& offset);

/// Resamples a pose stream and a width channel onto a uniform grid over their
/// common time span. Poses are interpolated geodesically, widths linearly.
/// Throws EmptyOverlap, NonMonotonicTimestamps or InvalidInput.
FlangeTrajectory resample(const std::vector<PoseSample>& stream, const std::vector<WidthSample>& widths,
                          double target_rate, Arm arm = Arm::Right);

/// Applies `offset` to every sample, then resamples.
FlangeTrajectory build_flange_trajectory(const std::vector<PoseSample>& stream, const RigidTransform& offset,
                                         const std::vector<WidthSample>& widths, double target_rate, Arm arm);

}  // namespace hdkit::transfer
