#include "hdkit/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hdkit/error.hpp"

namespace hdkit::io {
namespace {

using nlohmann::json;
using geometry::RigidTransform;
using geometry::Vec3;

Vec3 vec3(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw Error(ErrorCode::ParseError, "expected 3 coordinates");
  return {v[0], v[1], v[2]};
}

RigidTransform pose_of(const json& j) {
  const auto r = j.at("rot").get<std::vector<double>>();
  if (r.size() != 4) throw Error(ErrorCode::ParseError, "rot needs 4 entries [w, x, y, z]");
  return RigidTransform::from_quaternion(Eigen::Vector4d(r[0], r[1], r[2], r[3]), vec3(j.at("pos")));
}

json pose_fields(double t, const RigidTransform& pose) {
  const auto q = pose.quaternion();
  const auto& p = pose.translation;
  return {{"t", t}, {"pos", {p.x(), p.y(), p.z()}}, {"rot", {q(0), q(1), q(2), q(3)}}};
}

// Calls `fn(json)` per non-blank line, converting any failure into a ParseError with the line number.
template <typename Fn>
void for_each_line(const std::string& path, Fn&& fn) {
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code() == ErrorCode::NotNormalized ? ErrorCode::ParseError : e.code(),
                  path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string side_name(tracking::Side s) { return s == tracking::Side::Left ? "left" : "right"; }

json detail_of(const feasibility::FrameVerdict& v) {
  json checks = json::array();
  for (const auto& viol : v.violations) {
    json c = {{"status", feasibility::to_string(viol.status)}, {"value", viol.value}, {"limit", viol.limit}};
    if (viol.joint >= 0) c["joint"] = "J" + std::to_string(viol.joint + 1);
    checks.push_back(std::move(c));
  }
  return {{"violations", checks}};
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::InvalidInput, "write failed for " + path);
}

std::string pose_line(double t, const RigidTransform& pose) { return pose_fields(t, pose).dump(); }

std::vector<transfer::PoseSample> read_pose_stream(const std::string& path, transfer::Source source) {
  std::vector<transfer::PoseSample> out;
  for_each_line(path, [&](const json& j) { out.push_back({j.at("t").get<double>(), pose_of(j), source}); });
  return out;
}

void write_pose_stream(const std::vector<transfer::PoseSample>& stream, const std::string& path) {
  std::string text;
  for (const auto& s : stream) text += pose_line(s.timestamp, s.pose) + "\n";
  write_text(path, text);
}

std::vector<transfer::WidthSample> read_widths(const std::string& path) {
  std::vector<transfer::WidthSample> out;
  for_each_line(path, [&](const json& j) { out.push_back({j.at("t").get<double>(), j.at("width").get<double>()}); });
  return out;
}

void write_widths(const std::vector<transfer::WidthSample>& widths, const std::string& path) {
  std::string text;
  for (const auto& w : widths) text += json{{"t", w.timestamp}, {"width", w.width}}.dump() + "\n";
  write_text(path, text);
}

transfer::FlangeTrajectory read_trajectory(const std::string& path) {
  transfer::FlangeTrajectory traj;
  for_each_line(path, [&](const json& j) {
    traj.samples.push_back({j.at("t").get<double>(), pose_of(j), j.at("width").get<double>(),
                            transfer::arm_from_string(j.at("arm").get<std::string>())});
  });
  if (traj.samples.size() >= 2) {
    const double dt = traj.samples[1].timestamp - traj.samples[0].timestamp;
    if (!(dt > 0)) throw Error(ErrorCode::NonMonotonicTimestamps, path + ": timestamps must increase");
    traj.rate = 1.0 / dt;
  }
  return traj;
}

void write_trajectory(const transfer::FlangeTrajectory& trajectory, const std::string& path) {
  std::string text;
  for (const auto& s : trajectory.samples) {
    json j = pose_fields(s.timestamp, s.pose);
    j["width"] = s.width;
    j["arm"] = transfer::to_string(s.arm);
    text += j.dump() + "\n";
  }
  write_text(path, text);
}

std::vector<tracking::MarkerFrame> read_marker_stream(const std::string& path) {
  std::vector<tracking::MarkerFrame> out;
  for_each_line(path, [&](const json& j) {
    tracking::MarkerFrame f;
    f.timestamp = j.at("t").get<double>();
    for (const auto& m : j.at("points")) f.observations.push_back(vec3(m));
    out.push_back(std::move(f));
  });
  return out;
}

void write_marker_stream(const std::vector<tracking::MarkerFrame>& frames, const std::string& path) {
  std::string text;
  for (const auto& f : frames) {
    json markers = json::array();
    for (const auto& p : f.observations) markers.push_back({p.x(), p.y(), p.z()});
    text += json{{"t", f.timestamp}, {"points", markers}}.dump() + "\n";
  }
  write_text(path, text);
}

ModelFile read_model(const std::string& path) {
  try {
    const json j = json::parse(read_text(path));
    std::vector<Vec3> refs;
    for (const auto& p : j.at("reference_positions")) refs.push_back(vec3(p));
    std::optional<tracking::Side> side;
    if (j.contains("side")) {
      const auto s = j["side"].get<std::string>();
      if (s != "left" && s != "right") throw Error(ErrorCode::ParseError, "side must be 'left' or 'right'");
      side = s == "left" ? tracking::Side::Left : tracking::Side::Right;
    }
    return {tracking::MarkerObjectModel(j.at("ids").get<std::vector<std::string>>(), refs, false), side};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

void write_model(const tracking::MarkerObjectModel& model, std::optional<tracking::Side> side, const std::string& path) {
  json refs = json::array();
  for (const auto& p : model.reference_positions()) refs.push_back({p.x(), p.y(), p.z()});
  json j = {{"ids", model.ids()}, {"reference_positions", refs}};
  if (side) j["side"] = side_name(*side);
  write_text(path, j.dump(2) + "\n");
}

std::string verdict_log(const feasibility::EpisodeVerdict& verdict) {
  std::string text;
  for (const auto& e : verdict.log) {
    text += json{{"frame", e.frame},
                 {"arm", transfer::to_string(e.arm)},
                 {"status", feasibility::to_string(e.verdict.status)},
                 {"detail", detail_of(e.verdict)}}
                .dump() +
            "\n";
  }
  return text;
}

}  // namespace hdkit::io
