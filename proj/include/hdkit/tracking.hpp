#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hdkit/geometry.hpp"

namespace hdkit::tracking {

using geometry::RigidTransform;
using geometry::Vec3;

/// Gating radius shared by prior prediction and pairwise-topology checks (m).
inline constexpr double kGateRadius = 5e-3;
/// Weight of the prior-proximity term in the assignment cost.
inline constexpr double kPriorWeight = 1.0;
/// Cost gap below which the two best assignments are considered tied (m^2).
inline constexpr double kAmbiguityGap = 1e-9;

/// Rigid marker layout with identities. Reference positions live in the body
/// frame and are centered on their centroid.
class MarkerObjectModel {
 public:
  MarkerObjectModel() = default;
  /// Throws InvalidInput for fewer than 4 markers, duplicate ids, or collinear layouts.
  MarkerObjectModel(std::vector<std::string> ids, std::vector<Vec3> reference_positions, bool recenter = true);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Vec3>& reference_positions() const { return reference_; }
  const Eigen::MatrixXd& pairwise_distances() const { return distances_; }
  /// Index of `id`, or nullopt.
  std::optional<std::size_t> index_of(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<Vec3> reference_;
  Eigen::MatrixXd distances_;
};

struct MarkerFrame {
  double timestamp = 0.0;
  std::vector<Vec3> observations;
};

/// Per-marker observation index (aligned with the model's marker order);
/// nullopt marks the marker occluded.
struct Assignment {
  std::vector<std::optional<std::size_t>> mapping;
  double cost = 0.0;      // minimized objective, m^2
  double residual = 0.0;  // RMS pairwise-distance deviation over assigned markers, m

  std::size_t assigned_count() const;
  std::vector<std::size_t> occluded_markers() const;
};

struct Prior {
  RigidTransform pose;  // predicted body-to-world pose for this frame
  std::optional<Assignment> assignment;
};

/// Labels observations with marker identities. Maximizes the number of
/// gated assignments, then minimizes pairwise-distance inconsistency plus
/// prior proximity, exactly, by branch-and-bound. Fewer than 3 observations
/// give an all-occluded result. Throws AmbiguousAssignment on a tie.
Assignment assign_identities(const MarkerObjectModel& model, const MarkerFrame& frame,
                             const std::optional<Prior>& prior = std::nullopt);

/// Objective value of an arbitrary candidate mapping (nullopt when it breaks a gate).
std::optional<double> assignment_cost(const MarkerObjectModel& model, const MarkerFrame& frame,
                                      const std::vector<std::optional<std::size_t>>& mapping,
                                      const std::optional<Prior>& prior = std::nullopt);

struct PoseEstimate {
  RigidTransform pose;
  double rms = 0.0;
};

/// Body-to-world pose from assigned markers. Throws DegenerateConfiguration.
PoseEstimate estimate_pose(const MarkerObjectModel& model, const MarkerFrame& frame, const Assignment& assignment);

struct RecoveredMarker {
  std::string id;
  Vec3 position;
};

std::vector<RecoveredMarker> recover_occluded(const MarkerObjectModel& model, const RigidTransform& pose,
                                              const Assignment& assignment);

struct LabeledPoints {
  std::vector<std::string> ids;
  std::vector<Vec3> points;
};

/// Builds the object model from a fully labeled first frame and an unlabeled
/// sequence (>= 10 frames). Throws InsufficientFrames or NonRigidSequence.
MarkerObjectModel build_model(const LabeledPoints& first_frame, const std::vector<MarkerFrame>& sequence);

enum class Side { Left, Right };

/// Local collector frame: y from the widest designated marker pair (R1->R5 or
/// L1->L4), x the marker-plane normal, z = x cross y, origin at the centroid.
/// Throws MissingFrameMarker or DegenerateConfiguration.
RigidTransform construct_flange_frame(Side side, const std::map<std::string, Vec3>& labeled_points);

double gripper_opening(const Vec3& a, const Vec3& b);

/// Orders marker ids by alphabetic prefix, then numeric suffix (R2 < R10).
bool marker_id_less(const std::string& a, const std::string& b);

struct TrackResult {
  double timestamp = 0.0;
  Assignment assignment;
  std::optional<PoseEstimate> pose;
  std::vector<RecoveredMarker> recovered;
  bool ambiguous = false;
};

/// Stateful per-stream tracker: carries the previous poses for a
/// constant-velocity prior and re-labels from topology alone when the prior
/// loses markers.
class MarkerTracker {
 public:
  explicit MarkerTracker(MarkerObjectModel model) : model_(std::move(model)) {}

  TrackResult track(const MarkerFrame& frame);
  /// Starts tracking from a known pose (e.g. the labeled first frame).
  void seed(const RigidTransform& pose);
  void reset();
  const MarkerObjectModel& model() const { return model_; }

 private:
  std::optional<Prior> predict() const;

  MarkerObjectModel model_;
  std::optional<RigidTransform> last_pose_;
  std::optional<RigidTransform> prev_pose_;
  std::optional<Assignment> last_assignment_;
};

}  // namespace hdkit::tracking
