#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hdkit/geometry.hpp"

namespace hdkit::pyramid {

using geometry::RigidTransform;

inline constexpr int kActionDim = 16;
inline constexpr int kSchemaVersion = 1;

enum class Mode { Precision, Portable };
enum class Layer { BaseSingleArm, TaskBimanual, RecoveryOnline, RecoveryOffline, NominalExtra };
enum class Stage { Pretrain, Task, Refine };

std::string to_string(Mode m);
std::string to_string(Layer l);
std::string to_string(Stage s);
Mode mode_from_string(const std::string& s);
Layer layer_from_string(const std::string& s);
/// Throws UnknownStage.
Stage stage_from_string(const std::string& s);

struct EpisodeFrame {
  double timestamp = 0.0;
  RigidTransform left_pose;
  RigidTransform right_pose;
  double left_width = 0.0;
  double right_width = 0.0;
  std::array<double, kActionDim> action{};  // 2 x 7 joint commands + 2 gripper commands
  std::array<std::string, 2> wrist_rgb;     // content-addressed media ids
  std::vector<std::string> tactile;         // 2 to 4 sensor ids
};

struct FeasibilitySummary {
  bool valid = true;
  std::optional<std::size_t> first_invalid_frame;
};

struct EpisodeRecord {
  std::string id;
  std::string task;
  Mode mode = Mode::Precision;
  Layer layer = Layer::TaskBimanual;
  std::vector<EpisodeFrame> frames;
  std::optional<FeasibilitySummary> feasibility;

  /// Throws InvalidInput on empty ids, unordered frames, or bad tactile counts.
  void validate() const;
};

/// Writes the episode as JSONL (header line, then one line per frame) and
/// returns the FNV-1a checksum of the written bytes.
std::uint64_t write_episode(const EpisodeRecord& episode, const std::string& path);
EpisodeRecord read_episode(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t file_checksum(const std::string& path);

struct ManifestEntry {
  std::string id;
  std::string task;
  Layer layer = Layer::TaskBimanual;
  Mode mode = Mode::Precision;
  std::string file;                      // relative to the manifest; empty for count-only entries
  std::optional<std::uint64_t> checksum;  // required when file is set

  bool operator==(const ManifestEntry&) const = default;
};

struct PyramidManifest {
  int schema_version = kSchemaVersion;
  std::vector<ManifestEntry> episodes;

  /// Throws DuplicateEpisode if the id exists anywhere in the manifest.
  void add(ManifestEntry entry);
  std::map<Layer, std::vector<std::string>> layers() const;
  std::map<std::string, std::map<Layer, std::size_t>> task_counts() const;

  bool operator==(const PyramidManifest&) const = default;
};

/// Serializes to one JSON document (schema_version, layers, task_counts, episodes).
std::string manifest_to_json(const PyramidManifest& manifest);
/// Throws ParseError, DuplicateEpisode, or InvalidInput when counts disagree with lists.
PyramidManifest manifest_from_json(const std::string& text);

void write_manifest(const PyramidManifest& manifest, const std::string& path);
/// Also verifies every referenced episode file's checksum (ChecksumMismatch).
PyramidManifest read_manifest(const std::string& path, bool verify_files = true);

struct TaskStats {
  std::size_t base = 0;
  std::size_t demos = 0;  // task_bimanual
  std::size_t recovery_online = 0;
  std::size_t recovery_offline = 0;
  std::size_t nominal_extra = 0;
  /// (online + offline recovery) / demos; nullopt when there are no demos.
  std::optional<double> recovery_ratio;
};

struct PyramidStats {
  std::map<Layer, std::size_t> per_layer;
  std::map<std::string, TaskStats> per_task;
};

PyramidStats pyramid_stats(const PyramidManifest& manifest);

/// pretrain: base layer; task: task layer; refine: task and both recovery layers.
std::vector<ManifestEntry> stage_filter(const PyramidManifest& manifest, Stage stage);
std::vector<ManifestEntry> stage_filter(const PyramidManifest& manifest, const std::string& stage);

/// Multi-positive InfoNCE with temporal positives. `visual` holds B+1
/// embeddings; tactile i has positives {v_i, v_{i+1}} and every other visual
/// embedding as a negative. Throws DimensionMismatch, NotNormalized (1e-9),
/// NonPositiveTemperature.
double contrastive_loss(const std::vector<Eigen::VectorXd>& tactile, const std::vector<Eigen::VectorXd>& visual,
                        double tau);

/// Sum over timesteps of the L1 action error; both inputs T x 16.
double action_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

}  // namespace hdkit::pyramid
