#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hdkit/feasibility.hpp"
#include "hdkit/tracking.hpp"
#include "hdkit/transfer.hpp"

// JSONL / JSON file formats. Parse failures throw ParseError naming the line.
//   pose stream    {"t": s, "pos": [x, y, z], "rot": [w, x, y, z]}
//   widths         {"t": s, "width": m}
//   trajectory     {"t": s, "pos": [...], "rot": [...], "width": m, "arm": "left"|"right"}
//   marker stream  {"t": s, "points": [[x, y, z], ...]}
//   marker model   {"ids": [...], "reference_positions": [[x, y, z], ...], "side": "left"|"right"}
//   verdict log    {"frame": i, "arm": "left", "status": "tcp_overspeed", "detail": {...}}

namespace hdkit::io {

std::vector<transfer::PoseSample> read_pose_stream(const std::string& path,
                                                   transfer::Source source = transfer::Source::Mocap240Hz);
void write_pose_stream(const std::vector<transfer::PoseSample>& stream, const std::string& path);

std::vector<transfer::WidthSample> read_widths(const std::string& path);
void write_widths(const std::vector<transfer::WidthSample>& widths, const std::string& path);

/// Rate is recovered from the first two timestamps (30 Hz for a single sample).
transfer::FlangeTrajectory read_trajectory(const std::string& path);
void write_trajectory(const transfer::FlangeTrajectory& trajectory, const std::string& path);

std::vector<tracking::MarkerFrame> read_marker_stream(const std::string& path);
void write_marker_stream(const std::vector<tracking::MarkerFrame>& frames, const std::string& path);

struct ModelFile {
  tracking::MarkerObjectModel model;
  std::optional<tracking::Side> side;
};
ModelFile read_model(const std::string& path);
void write_model(const tracking::MarkerObjectModel& model, std::optional<tracking::Side> side, const std::string& path);

std::string pose_line(double t, const geometry::RigidTransform& pose);
/// One JSONL line per (frame, arm) verdict.
std::string verdict_log(const feasibility::EpisodeVerdict& verdict);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace hdkit::io
