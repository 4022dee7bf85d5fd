#include "hdkit/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "hdkit/error.hpp"

namespace hdkit::transfer {
namespace {

constexpr double kGridSlack = 1e-9;  // s

template <typename T>
void require_increasing(const std::vector<T>& xs, const char* what) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i].timestamp)) throw Error(ErrorCode::InvalidInput, std::string("non-finite timestamp in ") + what);
    if (i > 0 && !(xs[i].timestamp > xs[i - 1].timestamp)) {
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  std::string(what) + " timestamps not strictly increasing at index " + std::to_string(i));
    }
  }
}

// Index k of the bracketing interval [k, k+1] containing t (t inside the span).
template <typename T>
std::size_t bracket(const std::vector<T>& xs, double t) {
  const auto it = std::upper_bound(xs.begin(), xs.end(), t, [](double v, const T& s) { return v < s.timestamp; });
  const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - xs.begin()) - 1));
  return std::min(k, xs.size() - 2);
}

}  // namespace

std::string to_string(Source s) { return s == Source::Mocap240Hz ? "mocap_240hz" : "vr_100hz"; }
std::string to_string(Arm a) { return a == Arm::Left ? "left" : "right"; }

Arm arm_from_string(const std::string& s) {
  if (s == "left") return Arm::Left;
  if (s == "right") return Arm::Right;
  throw Error(ErrorCode::InvalidInput, "arm must be 'left' or 'right', got '" + s + "'");
}

void FlangeTrajectory::validate() const {
  if (!(rate > 0)) throw Error(ErrorCode::InvalidInput, "trajectory rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].width >= 0)) throw Error(ErrorCode::InvalidInput, "negative gripper width at sample " + std::to_string(i));
    if (i > 0) {
      const double dt = samples[i].timestamp - samples[i - 1].timestamp;
      if (std::abs(dt - 1.0 / rate) > kGridSlack) {
        throw Error(ErrorCode::InvalidInput, "non-uniform timestep at sample " + std::to_string(i));
      }
    }
  }
}

RigidTransform to_flange(const PoseSample& tracked, const RigidTransform& offset) {
  return geometry::compose(tracked.pose, offset);
}

FlangeTrajectory resample(const std::vector<PoseSample>& stream, const std::vector<WidthSample>& widths,
                          double target_rate, Arm arm) {
  if (!(target_rate > 0) || !std::isfinite(target_rate)) throw Error(ErrorCode::InvalidInput, "target rate must be positive");
  if (stream.size() < 2) throw Error(ErrorCode::InvalidInput, "pose stream needs at least 2 samples");
  if (widths.size() < 2) throw Error(ErrorCode::InvalidInput, "width channel needs at least 2 samples");
  require_increasing(stream, "pose stream");
  require_increasing(widths, "width channel");
  for (const auto& w : widths) {
    if (!(w.width >= 0)) throw Error(ErrorCode::InvalidInput, "negative gripper width");
  }

  const double t0 = std::max(stream.front().timestamp, widths.front().timestamp);
  const double t1 = std::min(stream.back().timestamp, widths.back().timestamp);
  if (!(t1 >= t0)) throw Error(ErrorCode::EmptyOverlap, "pose and width streams do not overlap in time");

  const auto count = static_cast<std::size_t>(std::floor((t1 - t0) * target_rate + kGridSlack)) + 1;
  FlangeTrajectory out;
  out.rate = target_rate;
  out.samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = std::min(t0 + static_cast<double>(k) / target_rate, t1);

    const std::size_t i = bracket(stream, t);
    const auto& a = stream[i];
    const auto& b = stream[i + 1];
    const double s = std::clamp((t - a.timestamp) / (b.timestamp - a.timestamp), 0.0, 1.0);

    const std::size_t j = bracket(widths, t);
    const auto& wa = widths[j];
    const auto& wb = widths[j + 1];
    const double u = std::clamp((t - wa.timestamp) / (wb.timestamp - wa.timestamp), 0.0, 1.0);

    out.samples.push_back({t, geometry::interpolate_pose(a.pose, b.pose, s), wa.width + u * (wb.width - wa.width), arm});
  }
  return out;
}

FlangeTrajectory build_flange_trajectory(const std::vector<PoseSample>& stream, const RigidTransform& offset,
                                         const std::vector<WidthSample>& widths, double target_rate, Arm arm) {
  std::vector<PoseSample> flange = stream;
  for (auto& s : flange) s.pose = to_flange(s, offset);
  return resample(flange, widths, target_rate, arm);
}

}  // namespace hdkit::transfer
