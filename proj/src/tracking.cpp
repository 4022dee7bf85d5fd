#include "hdkit/tracking.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "hdkit/error.hpp"

namespace hdkit::tracking {
namespace {

constexpr std::size_t kMinSequenceFrames = 10;
constexpr double kRigidityTolerance = 2e-3;  // m, RMS distance-matrix deviation

std::pair<std::string, long> split_id(const std::string& id) {
  std::size_t cut = id.size();
  while (cut > 0 && std::isdigit(static_cast<unsigned char>(id[cut - 1]))) --cut;
  if (cut == id.size()) return {id, -1};
  return {id.substr(0, cut), std::stol(id.substr(cut))};
}

}  // namespace

bool marker_id_less(const std::string& a, const std::string& b) {
  const auto ka = split_id(a);
  const auto kb = split_id(b);
  if (ka != kb) return ka < kb;
  return a < b;
}

MarkerObjectModel::MarkerObjectModel(std::vector<std::string> ids, std::vector<Vec3> reference_positions, bool recenter)
    : ids_(std::move(ids)), reference_(std::move(reference_positions)) {
  if (ids_.size() != reference_.size()) throw Error(ErrorCode::InvalidInput, "marker id and position counts differ");
  if (ids_.size() < 4) throw Error(ErrorCode::InvalidInput, "a marker object needs at least 4 markers");
  if (std::set<std::string>(ids_.begin(), ids_.end()).size() != ids_.size()) {
    throw Error(ErrorCode::InvalidInput, "duplicate marker id");
  }
  for (const auto& p : reference_) {
    if (!p.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite marker position");
  }
  if (geometry::centered_rank(reference_) < 2) throw Error(ErrorCode::InvalidInput, "marker layout is collinear");
  if (recenter) {
    const Vec3 c = geometry::centroid(reference_);
    for (auto& p : reference_) p -= c;
  }
  const auto n = static_cast<Eigen::Index>(reference_.size());
  distances_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) distances_(i, j) = (reference_[i] - reference_[j]).norm();
  }
}

std::optional<std::size_t> MarkerObjectModel::index_of(const std::string& id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

PoseEstimate estimate_pose(const MarkerObjectModel& model, const MarkerFrame& frame, const Assignment& assignment) {
  if (assignment.mapping.size() != model.size()) throw Error(ErrorCode::InvalidInput, "assignment does not match model");
  std::vector<Vec3> refs, obs;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (!assignment.mapping[i]) continue;
    refs.push_back(model.reference_positions()[i]);
    obs.push_back(frame.observations.at(*assignment.mapping[i]));
  }
  if (refs.size() < 3) throw Error(ErrorCode::DegenerateConfiguration, "fewer than 3 assigned markers");
  const auto aligned = geometry::kabsch_align(refs, obs);
  return {aligned.transform, aligned.rms_error};
}

std::vector<RecoveredMarker> recover_occluded(const MarkerObjectModel& model, const RigidTransform& pose,
                                              const Assignment& assignment) {
  std::vector<RecoveredMarker> out;
  for (std::size_t i = 0; i < model.size() && i < assignment.mapping.size(); ++i) {
    if (assignment.mapping[i]) continue;
    out.push_back({model.ids()[i], pose.apply(model.reference_positions()[i])});
  }
  return out;
}

double gripper_opening(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

RigidTransform construct_flange_frame(Side side, const std::map<std::string, Vec3>& labeled_points) {
  const std::string low = side == Side::Right ? "R1" : "L1";
  const std::string high = side == Side::Right ? "R5" : "L4";
  const auto lo_it = labeled_points.find(low);
  const auto hi_it = labeled_points.find(high);
  if (lo_it == labeled_points.end() || hi_it == labeled_points.end()) {
    throw Error(ErrorCode::MissingFrameMarker, "frame needs markers " + low + " and " + high);
  }

  std::vector<std::string> order;
  std::vector<Vec3> pts;
  for (const auto& [id, p] : labeled_points) order.push_back(id);
  std::sort(order.begin(), order.end(), marker_id_less);
  for (const auto& id : order) pts.push_back(labeled_points.at(id));
  if (pts.size() < 3 || geometry::centered_rank(pts) < 2) {
    throw Error(ErrorCode::DegenerateConfiguration, "markers are collinear; plane normal undefined");
  }

  const Vec3 origin = geometry::centroid(pts);
  Eigen::MatrixXd centered(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) centered.row(static_cast<Eigen::Index>(i)) = (pts[i] - origin).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
  Vec3 normal = svd.matrixV().col(2);

  // Sign from the first non-degenerate index-ordered triple (normally the three lowest).
  const double scale = centered.rowwise().norm().maxCoeff();
  bool oriented = false;
  for (std::size_t a = 0; a < pts.size() && !oriented; ++a) {
    for (std::size_t b = a + 1; b < pts.size() && !oriented; ++b) {
      for (std::size_t c = b + 1; c < pts.size() && !oriented; ++c) {
        const Vec3 cross = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
        if (cross.norm() <= 1e-9 * scale * scale) continue;
        if (normal.dot(cross) < 0) normal = -normal;
        oriented = true;
      }
    }
  }

  const Vec3 y = (hi_it->second - lo_it->second).normalized();
  Vec3 x = normal - normal.dot(y) * y;
  if (!(x.norm() > 1e-9)) throw Error(ErrorCode::DegenerateConfiguration, "marker plane normal parallel to frame y-axis");
  x.normalize();
  RigidTransform frame;
  frame.rotation.col(0) = x;
  frame.rotation.col(1) = y;
  frame.rotation.col(2) = x.cross(y);
  frame.translation = origin;
  return frame;
}

void MarkerTracker::seed(const RigidTransform& pose) {
  last_pose_ = pose;
  prev_pose_.reset();
  last_assignment_.reset();
}

void MarkerTracker::reset() {
  last_pose_.reset();
  prev_pose_.reset();
  last_assignment_.reset();
}

std::optional<Prior> MarkerTracker::predict() const {
  if (!last_pose_) return std::nullopt;
  Prior prior;
  prior.assignment = last_assignment_;
  if (prev_pose_) {
    const RigidTransform delta = geometry::compose(*last_pose_, geometry::invert(*prev_pose_));
    prior.pose = geometry::compose(delta, *last_pose_);
  } else {
    prior.pose = *last_pose_;
  }
  return prior;
}

TrackResult MarkerTracker::track(const MarkerFrame& frame) {
  TrackResult result;
  result.timestamp = frame.timestamp;
  result.assignment.mapping.assign(model_.size(), std::nullopt);

  const auto prior = predict();
  bool have = false;
  if (prior) {
    try {
      result.assignment = assign_identities(model_, frame, prior);
      have = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AmbiguousAssignment) throw;
      result.ambiguous = true;
    }
  }
  const std::size_t reachable = std::min(model_.size(), frame.observations.size());
  if (!have || result.assignment.assigned_count() < reachable) {
    try {
      auto fresh = assign_identities(model_, frame);
      if (!have || fresh.assigned_count() > result.assignment.assigned_count()) {
        result.assignment = std::move(fresh);
        have = true;
        result.ambiguous = false;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AmbiguousAssignment) throw;
      if (!have) result.ambiguous = true;
    }
  }

  if (have && result.assignment.assigned_count() >= 3) {
    try {
      result.pose = estimate_pose(model_, frame, result.assignment);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateConfiguration) throw;
    }
  }
  if (result.pose) {
    result.recovered = recover_occluded(model_, result.pose->pose, result.assignment);
    prev_pose_ = last_pose_;
    last_pose_ = result.pose->pose;
    last_assignment_ = result.assignment;
  } else {
    prev_pose_.reset();
  }
  return result;
}

MarkerObjectModel build_model(const LabeledPoints& first_frame, const std::vector<MarkerFrame>& sequence) {
  if (sequence.size() < kMinSequenceFrames) {
    throw Error(ErrorCode::InsufficientFrames, "model construction needs at least 10 frames, got " +
                                                   std::to_string(sequence.size()));
  }
  const MarkerObjectModel provisional(first_frame.ids, first_frame.points, true);
  const std::size_t m = provisional.size();

  // Labeled observations per frame; the first frame is fully labeled by definition.
  std::vector<std::vector<std::optional<Vec3>>> labeled;
  labeled.emplace_back(first_frame.points.begin(), first_frame.points.end());

  MarkerTracker tracker(provisional);
  tracker.seed(RigidTransform::from_translation(geometry::centroid(first_frame.points)));
  for (const auto& frame : sequence) {
    const TrackResult r = tracker.track(frame);
    if (!r.pose) continue;
    std::vector<std::optional<Vec3>> row(m);
    for (std::size_t i = 0; i < m; ++i) {
      if (r.assignment.mapping[i]) row[i] = frame.observations[*r.assignment.mapping[i]];
    }
    labeled.push_back(std::move(row));
  }
  if (labeled.size() - 1 < kMinSequenceFrames) {
    throw Error(ErrorCode::InsufficientFrames, "only " + std::to_string(labeled.size() - 1) +
                                                   " sequence frames could be labeled");
  }

  // Rigidity: every frame's distance matrix must stay close to the mean one.
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd cnt = Eigen::MatrixXd::Zero(m, m);
  auto dist = [](const auto& row, std::size_t a, std::size_t b) { return (*row[a] - *row[b]).norm(); };
  for (const auto& row : labeled) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (!row[a] || !row[b]) continue;
        sum(a, b) += dist(row, a, b);
        cnt(a, b) += 1.0;
      }
    }
  }
  for (std::size_t k = 0; k < labeled.size(); ++k) {
    const auto& row = labeled[k];
    double sq = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (!row[a] || !row[b]) continue;
        const double dev = dist(row, a, b) - sum(a, b) / cnt(a, b);
        sq += dev * dev;
        ++pairs;
      }
    }
    if (pairs > 0 && std::sqrt(sq / pairs) > kRigidityTolerance) {
      throw Error(ErrorCode::NonRigidSequence, "frame " + std::to_string(k) + " deviates " +
                                                   std::to_string(std::sqrt(sq / pairs) * 1e3) + " mm RMS from the mean geometry");
    }
  }

  // Align every labeled frame into the body frame and average; a second pass
  // re-aligns against the first-pass mean.
  auto average_against = [&](const std::vector<Vec3>& reference) {
    std::vector<Vec3> acc(m, Vec3::Zero());
    std::vector<double> n(m, 0.0);
    for (const auto& row : labeled) {
      std::vector<Vec3> src, dst;
      for (std::size_t i = 0; i < m; ++i) {
        if (!row[i]) continue;
        src.push_back(*row[i]);
        dst.push_back(reference[i]);
      }
      if (src.size() < 3 || geometry::centered_rank(src) < 2) continue;
      const auto to_body = geometry::kabsch_align(src, dst).transform;
      for (std::size_t i = 0; i < m; ++i) {
        if (!row[i]) continue;
        acc[i] += to_body.apply(*row[i]);
        n[i] += 1.0;
      }
    }
    for (std::size_t i = 0; i < m; ++i) acc[i] = n[i] > 0 ? Vec3(acc[i] / n[i]) : reference[i];
    return acc;
  };
  const auto first_pass = average_against(provisional.reference_positions());
  const auto second_pass = average_against(first_pass);
  return MarkerObjectModel(provisional.ids(), second_pass, true);
}

}  // namespace hdkit::tracking
