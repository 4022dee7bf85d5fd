#include "hdkit/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "hdkit/error.hpp"

namespace hdkit::mechanism {
namespace {

constexpr int kStrokeSamples = 1000;
constexpr int kMaxBisection = 200;
constexpr double kRootTolerance = 1e-9;       // mm
constexpr double kClosureSlack = 1e-12;       // arccos argument rounding allowance

bool finite_all(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// Cosine of phi2; nullopt when the l2/l3/l4 triangle cannot close.
std::optional<double> closure_cosine(double l2, double l3, double l4) {
  const double arg = (l2 * l2 + l4 * l4 - l3 * l3) / (2.0 * l2 * l4);
  if (!std::isfinite(arg) || std::abs(arg) > 1.0 + kClosureSlack) return std::nullopt;
  return std::clamp(arg, -1.0, 1.0);
}

double pivot_distance(double d, double x4, double x2) { return std::hypot(x4, d + x2); }

bool closes(const FlexionFixed& f, double x2) {
  return closure_cosine(f.l2, f.l3, pivot_distance(f.d, f.x4, x2)).has_value();
}

FlexionState evaluate(const FlexionFixed& f, double x3, double x2) {
  FlexionState s;
  s.x2 = x2;
  s.l4 = pivot_distance(f.d, f.x4, x2);
  s.phi3 = std::atan(f.x4 / (f.d + x2));
  const auto c = closure_cosine(f.l2, f.l3, s.l4);
  if (!c) {
    throw Error(ErrorCode::LoopClosureInfeasible, "linkage cannot close at x2 = " + std::to_string(x2));
  }
  s.phi2 = std::acos(*c);
  s.theta = std::numbers::pi / 2.0 - s.phi3 - s.phi2;
  s.w = x3 + f.l1 * std::sin(s.theta);
  s.x1 = f.l1 * (1.0 - std::cos(s.theta));
  return s;
}

void validate_fixed(const FlexionFixed& f) {
  if (!finite_all({f.l1, f.l2, f.l3, f.d, f.x4})) throw Error(ErrorCode::InvalidInput, "non-finite linkage parameter");
  if (!(f.l1 > 0 && f.l2 > 0 && f.l3 > 0 && f.d > 0)) {
    throw Error(ErrorCode::InvalidInput, "linkage lengths l1, l2, l3, d must be positive");
  }
  if (f.x4 < 0) throw Error(ErrorCode::InvalidInput, "x4 must be nonnegative");
}

FlexionFixed fixed_of(const FlexionParams& p) { return {p.l1, p.l2, p.l3, p.d, p.x4}; }

}  // namespace

void FlexionParams::validate() const {
  validate_fixed(fixed_of(*this));
  if (!finite_all({x3, stroke_max}) || x3 < 0) throw Error(ErrorCode::InvalidInput, "x3 must be finite and nonnegative");
  // A zero stroke is admitted: adaptation legitimately returns it when x1_max is met at the foremost position.
  if (stroke_max < 0) throw Error(ErrorCode::InvalidInput, "stroke_max must be nonnegative");
  for (int i = 0; i < kStrokeSamples; ++i) {
    const double x2 = std::min(stroke_max, stroke_max * i / (kStrokeSamples - 1));
    if (!closure_cosine(l2, l3, pivot_distance(d, x4, x2))) {
      throw Error(ErrorCode::LoopClosureInfeasible, "triangle l2/l3/l4 fails to close at x2 = " + std::to_string(x2));
    }
  }
}

void ParallelParams::validate() const {
  if (!finite_all({l_c, l_b}) || !(l_c > 0) || !(l_b > 0)) {
    throw Error(ErrorCode::InvalidInput, "crank and driving linkage lengths must be positive");
  }
}

FlexionState flexion_forward(const FlexionParams& params, double x2) {
  params.validate();
  if (!std::isfinite(x2) || x2 < 0 || x2 > params.stroke_max) {
    throw Error(ErrorCode::OutOfStroke, "x2 = " + std::to_string(x2) + " outside [0, " +
                                            std::to_string(params.stroke_max) + "]");
  }
  return evaluate(fixed_of(params), params.x3, x2);
}

double flexion_stroke_upper(const FlexionFixed& fixed) {
  validate_fixed(fixed);
  if (!closes(fixed, 0.0)) throw Error(ErrorCode::TargetUnreachable, "linkage does not close at the foremost slider position");
  // l4 grows without bound in x2, so an open end always exists.
  double lo = 0.0;
  double hi = std::max(fixed.d, fixed.l2 + fixed.l3);
  while (closes(fixed, hi)) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < kMaxBisection; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (closes(fixed, mid) ? lo : hi) = mid;
  }
  return lo;
}

FlexionAdaptation flexion_adapt(const FlexionTargets& targets, const FlexionFixed& fixed) {
  validate_fixed(fixed);
  if (!finite_all({targets.x1_max, targets.w_max})) throw Error(ErrorCode::InvalidInput, "non-finite target");
  if (!(targets.x1_max > 0 && targets.x1_max < fixed.l1)) {
    throw Error(ErrorCode::TargetUnreachable, "x1_max must lie in (0, l1)");
  }

  FlexionAdaptation out;
  out.stroke_upper = flexion_stroke_upper(fixed);
  const double upper = out.stroke_upper;
  auto x1_at = [&](double x2) { return evaluate(fixed, 0.0, x2).x1; };

  double prev = x1_at(0.0);
  int direction = 0;
  for (int i = 1; i < kStrokeSamples; ++i) {
    const double cur = x1_at(std::min(upper, upper * i / (kStrokeSamples - 1)));
    const int step = cur > prev ? 1 : (cur < prev ? -1 : 0);
    if (step == 0 || (direction != 0 && step != direction)) {
      throw Error(ErrorCode::NonMonotonicStroke, "x1 is not strictly monotonic over the feasible stroke");
    }
    direction = step;
    prev = cur;
  }

  auto g = [&](double x2) { return x1_at(x2) - targets.x1_max; };
  const double g0 = g(0.0);
  const double gu = g(upper);
  double root;
  if (std::abs(g0) <= kRootTolerance) {
    root = 0.0;
  } else if (std::abs(gu) <= kRootTolerance) {
    root = upper;
  } else if ((g0 < 0) == (gu < 0)) {
    throw Error(ErrorCode::TargetUnreachable, "no slider displacement attains x1_max = " + std::to_string(targets.x1_max));
  } else {
    double lo = 0.0, hi = upper, glo = g0;
    root = 0.5 * (lo + hi);
    double best_abs = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kMaxBisection; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double gm = g(mid);
      if (std::abs(gm) < best_abs) {
        best_abs = std::abs(gm);
        root = mid;
      }
      if ((hi - lo) <= kRootTolerance && std::abs(gm) <= kRootTolerance) break;
      if (mid <= lo || mid >= hi || gm == 0.0) break;
      if ((gm < 0) == (glo < 0)) {
        lo = mid;
        glo = gm;
      } else {
        hi = mid;
      }
    }
  }
  out.x2_max = root;

  // x3 shifts w uniformly, so it is set where l1 sin(theta) peaks over the stroke endpoints.
  const double reach = std::max(evaluate(fixed, 0.0, 0.0).w, evaluate(fixed, 0.0, root).w);
  out.x3 = targets.w_max - reach;
  if (out.x3 < 0) {
    throw Error(ErrorCode::TargetUnreachable, "w_max = " + std::to_string(targets.w_max) +
                                                  " is below the jaw sweep alone (" + std::to_string(reach) + ")");
  }
  return out;
}

double parallel_forward(const ParallelParams& params) {
  params.validate();
  return params.l_c + 2.0 * params.l_b;
}

double parallel_adapt(double w_max, double l_c) {
  if (!finite_all({w_max, l_c}) || !(l_c > 0)) throw Error(ErrorCode::InvalidInput, "crank length must be positive");
  if (!(w_max > l_c)) throw Error(ErrorCode::TargetUnreachable, "w_max must exceed the crank length");
  return (w_max - l_c) / 2.0;
}

}  // namespace hdkit::mechanism
