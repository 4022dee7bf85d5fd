#pragma once

// Kinematics of the two handheld gripper templates. All lengths in millimeters.

namespace hdkit::mechanism {

/// Flexion-extension template.
///   l1        jaw link length
///   l2, l3    crank and coupler lengths forming the triangle with l4
///   d         distance from the slider's foremost position to pivot A
///   x3        slider mounting axis to gripper symmetry axis
///   x4        slider mounting axis to the axis through A parallel to the symmetry axis
///   stroke_max  maximum slider displacement x2 measured rearward from the foremost position
struct FlexionParams {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double d = 0.0;
  double x3 = 0.0;
  double x4 = 0.0;
  double stroke_max = 0.0;

  /// Throws InvalidInput on non-positive lengths and LoopClosureInfeasible when
  /// the l2/l3/l4 triangle cannot close somewhere on the stroke (1000 samples).
  void validate() const;
};

struct FlexionState {
  double x2 = 0.0;     // slider displacement
  double l4 = 0.0;     // pivot A to slider joint
  double phi3 = 0.0;   // rad
  double phi2 = 0.0;   // rad
  double theta = 0.0;  // jaw angle, rad
  double w = 0.0;      // jaw opening width
  double x1 = 0.0;     // fingertip fore-aft displacement
};

/// Linkage geometry that is held fixed while adapting a flexion interface.
struct FlexionFixed {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double d = 0.0;
  double x4 = 0.0;
};

struct FlexionTargets {
  double x1_max = 0.0;
  double w_max = 0.0;
};

struct FlexionAdaptation {
  double x2_max = 0.0;
  double x3 = 0.0;
  double stroke_upper = 0.0;  // largest loop-closable x2 for the fixed geometry

  FlexionParams params(const FlexionFixed& fixed) const {
    return {fixed.l1, fixed.l2, fixed.l3, fixed.d, x3, fixed.x4, x2_max};
  }
};

struct ParallelParams {
  double l_c = 0.0;  // crank length
  double l_b = 0.0;  // driving linkage length

  void validate() const;
};

/// Evaluates the loop-closure relations at slider displacement x2.
/// Throws OutOfStroke outside [0, stroke_max] and LoopClosureInfeasible when
/// the triangle inequality fails.
FlexionState flexion_forward(const FlexionParams& params, double x2);

/// Solves the stroke from x1_max first, then the lateral offset x3 from w_max.
/// Throws TargetUnreachable or NonMonotonicStroke.
FlexionAdaptation flexion_adapt(const FlexionTargets& targets, const FlexionFixed& fixed);

/// Largest x2 for which the linkage still closes, located by bisection.
/// Throws TargetUnreachable if the linkage does not close at x2 = 0.
double flexion_stroke_upper(const FlexionFixed& fixed);

/// w_max = l_c + 2 l_b
double parallel_forward(const ParallelParams& params);

/// Inverse of parallel_forward with l_c fixed. Throws TargetUnreachable if w_max <= l_c.
double parallel_adapt(double w_max, double l_c);

}  // namespace hdkit::mechanism
