#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "hdkit/error.hpp"
#include "hdkit/tracking.hpp"

namespace hdkit::tracking {
namespace {

struct Candidate {
  std::size_t count = 0;
  double cost = 0.0;
  std::vector<int> map;
};

// Exact search over injective partial mappings marker -> observation.
// Objective: maximize the assigned count, then minimize cost. Keeps the two
// best leaves so near-ties can be reported.
class BranchAndBound {
 public:
  BranchAndBound(const MarkerObjectModel& model, const MarkerFrame& frame, const std::optional<Prior>& prior)
      : model_(model), obs_(frame.observations), m_(model.size()), n_(frame.observations.size()) {
    obs_dist_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b = 0; b < n_; ++b) {
        obs_dist_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = (obs_[a] - obs_[b]).norm();
      }
    }
    if (prior) {
      predicted_.reserve(m_);
      for (const auto& r : model.reference_positions()) predicted_.push_back(prior->pose.apply(r));
    }
    current_.assign(m_, -1);
    used_.assign(n_, false);
  }

  void run() { descend(0, 0, 0.0); }

  const std::array<std::optional<Candidate>, 2>& top() const { return top_; }

 private:
  static bool beats(std::size_t count, double cost, const Candidate& c) {
    return count > c.count || (count == c.count && cost < c.cost);
  }

  bool can_improve(std::size_t max_count, double cost) const {
    if (!top_[1]) return true;
    return beats(max_count, cost, *top_[1]);
  }

  void offer(std::size_t count, double cost) {
    Candidate cand{count, cost, current_};
    if (!top_[0] || beats(count, cost, *top_[0])) {
      top_[1] = std::move(top_[0]);
      top_[0] = std::move(cand);
    } else if (!top_[1] || beats(count, cost, *top_[1])) {
      top_[1] = std::move(cand);
    }
  }

  void descend(std::size_t marker, std::size_t count, double cost) {
    const std::size_t free_obs = n_ - count;
    const std::size_t max_count = count + std::min(m_ - marker, free_obs);
    if (!can_improve(max_count, cost)) return;
    if (marker == m_) {
      offer(count, cost);
      return;
    }

    struct Option {
      std::size_t obs;
      double add;
    };
    std::vector<Option> options;
    const auto& ref_dist = model_.pairwise_distances();
    for (std::size_t j = 0; j < n_; ++j) {
      if (used_[j]) continue;
      double add = 0.0;
      bool ok = true;
      if (!predicted_.empty()) {
        const double miss = (obs_[j] - predicted_[marker]).norm();
        if (miss > kGateRadius) continue;
        add += kPriorWeight * miss * miss;
      }
      for (std::size_t a = 0; a < marker && ok; ++a) {
        if (current_[a] < 0) continue;
        const double dev = obs_dist_(static_cast<Eigen::Index>(j), current_[a]) -
                           ref_dist(static_cast<Eigen::Index>(marker), static_cast<Eigen::Index>(a));
        if (std::abs(dev) > kGateRadius) ok = false;
        add += dev * dev;
      }
      if (ok) options.push_back({j, add});
    }
    std::sort(options.begin(), options.end(), [](const Option& a, const Option& b) { return a.add < b.add; });

    for (const auto& opt : options) {
      current_[marker] = static_cast<int>(opt.obs);
      used_[opt.obs] = true;
      descend(marker + 1, count + 1, cost + opt.add);
      used_[opt.obs] = false;
      current_[marker] = -1;
    }
    descend(marker + 1, count, cost);
  }

  const MarkerObjectModel& model_;
  const std::vector<Vec3>& obs_;
  std::size_t m_;
  std::size_t n_;
  Eigen::MatrixXd obs_dist_;
  std::vector<Vec3> predicted_;
  std::vector<int> current_;
  std::vector<bool> used_;
  std::array<std::optional<Candidate>, 2> top_;
};

double pairwise_residual(const MarkerObjectModel& model, const MarkerFrame& frame,
                         const std::vector<std::optional<std::size_t>>& mapping) {
  double sq = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < mapping.size(); ++a) {
    if (!mapping[a]) continue;
    for (std::size_t b = a + 1; b < mapping.size(); ++b) {
      if (!mapping[b]) continue;
      const double dev = (frame.observations[*mapping[a]] - frame.observations[*mapping[b]]).norm() -
                         model.pairwise_distances()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      sq += dev * dev;
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : std::sqrt(sq / static_cast<double>(pairs));
}

}  // namespace

std::size_t Assignment::assigned_count() const {
  return static_cast<std::size_t>(std::count_if(mapping.begin(), mapping.end(), [](const auto& m) { return m.has_value(); }));
}

std::vector<std::size_t> Assignment::occluded_markers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    if (!mapping[i]) out.push_back(i);
  }
  return out;
}

std::optional<double> assignment_cost(const MarkerObjectModel& model, const MarkerFrame& frame,
                                      const std::vector<std::optional<std::size_t>>& mapping,
                                      const std::optional<Prior>& prior) {
  if (mapping.size() != model.size()) throw Error(ErrorCode::InvalidInput, "mapping size differs from marker count");
  double cost = 0.0;
  for (std::size_t a = 0; a < mapping.size(); ++a) {
    if (!mapping[a]) continue;
    if (*mapping[a] >= frame.observations.size()) throw Error(ErrorCode::InvalidInput, "observation index out of range");
    const Vec3& oa = frame.observations[*mapping[a]];
    if (prior) {
      const double miss = (oa - prior->pose.apply(model.reference_positions()[a])).norm();
      if (miss > kGateRadius) return std::nullopt;
      cost += kPriorWeight * miss * miss;
    }
    for (std::size_t b = 0; b < a; ++b) {
      if (!mapping[b]) continue;
      if (*mapping[b] == *mapping[a]) return std::nullopt;
      const double dev = (oa - frame.observations[*mapping[b]]).norm() -
                         model.pairwise_distances()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      if (std::abs(dev) > kGateRadius) return std::nullopt;
      cost += dev * dev;
    }
  }
  return cost;
}

Assignment assign_identities(const MarkerObjectModel& model, const MarkerFrame& frame, const std::optional<Prior>& prior) {
  Assignment out;
  out.mapping.assign(model.size(), std::nullopt);
  for (const auto& o : frame.observations) {
    if (!o.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite observation");
  }
  if (frame.observations.size() < 3) return out;

  BranchAndBound search(model, frame, prior);
  search.run();
  const auto& top = search.top();
  const Candidate& best = *top[0];
  if (top[1] && top[1]->count == best.count && top[1]->cost - best.cost < kAmbiguityGap) {
    throw Error(ErrorCode::AmbiguousAssignment,
                "two labelings of " + std::to_string(best.count) + " markers differ in cost by less than 1e-9 m^2");
  }
  for (std::size_t i = 0; i < best.map.size(); ++i) {
    if (best.map[i] >= 0) out.mapping[i] = static_cast<std::size_t>(best.map[i]);
  }
  out.cost = best.cost;
  out.residual = pairwise_residual(model, frame, out.mapping);
  return out;
}

}  // namespace hdkit::tracking
