#include "hdkit/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hdkit/error.hpp"

namespace hdkit::pyramid {
namespace {

using nlohmann::json;

constexpr double kUnitTolerance = 1e-9;

const std::array<std::pair<Layer, const char*>, 5> kLayerNames{{
    {Layer::BaseSingleArm, "base_single_arm"},
    {Layer::TaskBimanual, "task_bimanual"},
    {Layer::RecoveryOnline, "recovery_online"},
    {Layer::RecoveryOffline, "recovery_offline"},
    {Layer::NominalExtra, "nominal_extra"},
}};

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.empty() || s.size() > 16 || s.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
    throw Error(ErrorCode::ParseError, "checksum must be up to 16 hex digits, got '" + s + "'");
  }
  return std::stoull(s, nullptr, 16);
}

json pose_json(const RigidTransform& t) {
  const auto q = t.quaternion();
  return {{"pos", {t.translation.x(), t.translation.y(), t.translation.z()}}, {"rot", {q(0), q(1), q(2), q(3)}}};
}

RigidTransform pose_from(const json& j) {
  const auto p = j.at("pos").get<std::vector<double>>();
  const auto r = j.at("rot").get<std::vector<double>>();
  if (p.size() != 3 || r.size() != 4) throw Error(ErrorCode::ParseError, "pose needs pos[3] and rot[4]");
  return RigidTransform::from_quaternion(Eigen::Vector4d(r[0], r[1], r[2], r[3]), geometry::Vec3(p[0], p[1], p[2]));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path);
  out << bytes;
  if (!out) throw Error(ErrorCode::InvalidInput, "write failed for " + path);
}

void check_unit(const Eigen::VectorXd& v, const char* what, std::size_t i) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTolerance) {
    throw Error(ErrorCode::NotNormalized, std::string(what) + " embedding " + std::to_string(i) + " is not unit-norm");
  }
}

double log_sum_exp(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

std::string to_string(Mode m) { return m == Mode::Precision ? "precision" : "portable"; }

std::string to_string(Layer l) {
  for (const auto& [layer, name] : kLayerNames) {
    if (layer == l) return name;
  }
  return "unknown";
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Pretrain: return "pretrain";
    case Stage::Task: return "task";
    case Stage::Refine: return "refine";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  if (s == "precision") return Mode::Precision;
  if (s == "portable") return Mode::Portable;
  throw Error(ErrorCode::InvalidInput, "unknown mode '" + s + "'");
}

Layer layer_from_string(const std::string& s) {
  for (const auto& [layer, name] : kLayerNames) {
    if (s == name) return layer;
  }
  throw Error(ErrorCode::InvalidInput, "unknown layer '" + s + "'");
}

Stage stage_from_string(const std::string& s) {
  if (s == "pretrain") return Stage::Pretrain;
  if (s == "task") return Stage::Task;
  if (s == "refine") return Stage::Refine;
  throw Error(ErrorCode::UnknownStage, "unknown stage '" + s + "' (expected pretrain, task, refine)");
}

void EpisodeRecord::validate() const {
  if (id.empty()) throw Error(ErrorCode::InvalidInput, "episode id is empty");
  if (task.empty()) throw Error(ErrorCode::InvalidInput, "episode " + id + " has no task");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (!std::isfinite(f.timestamp) || (i > 0 && !(f.timestamp > frames[i - 1].timestamp))) {
      throw Error(ErrorCode::InvalidInput, "episode " + id + " frames not time-ordered at " + std::to_string(i));
    }
    if (f.tactile.size() < 2 || f.tactile.size() > 4) {
      throw Error(ErrorCode::InvalidInput, "episode " + id + " frame " + std::to_string(i) + " needs 2-4 tactile ids");
    }
    if (!(f.left_width >= 0 && f.right_width >= 0)) throw Error(ErrorCode::InvalidInput, "negative gripper width");
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_checksum(const std::string& path) { return fnv1a64(read_file(path)); }

std::uint64_t write_episode(const EpisodeRecord& episode, const std::string& path) {
  episode.validate();
  json header = {{"type", "header"},
                 {"schema_version", kSchemaVersion},
                 {"id", episode.id},
                 {"task", episode.task},
                 {"mode", to_string(episode.mode)},
                 {"layer", to_string(episode.layer)},
                 {"frame_count", episode.frames.size()}};
  if (episode.feasibility) {
    header["feasibility"] = {{"valid", episode.feasibility->valid}};
    if (episode.feasibility->first_invalid_frame) {
      header["feasibility"]["first_invalid_frame"] = *episode.feasibility->first_invalid_frame;
    }
  }
  std::string bytes = header.dump() + "\n";
  for (const auto& f : episode.frames) {
    const json line = {{"t", f.timestamp},
                       {"left", pose_json(f.left_pose)},
                       {"right", pose_json(f.right_pose)},
                       {"left_width", f.left_width},
                       {"right_width", f.right_width},
                       {"action", f.action},
                       {"wrist_rgb", f.wrist_rgb},
                       {"tactile", f.tactile}};
    bytes += line.dump() + "\n";
  }
  write_file(path, bytes);
  return fnv1a64(bytes);
}

EpisodeRecord read_episode(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  EpisodeRecord ep;
  std::optional<std::size_t> expected;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (lineno == 1) {
        if (j.value("type", "") != "header") throw Error(ErrorCode::ParseError, "first line must be the episode header");
        ep.id = j.at("id").get<std::string>();
        ep.task = j.at("task").get<std::string>();
        ep.mode = mode_from_string(j.at("mode").get<std::string>());
        ep.layer = layer_from_string(j.at("layer").get<std::string>());
        expected = j.at("frame_count").get<std::size_t>();
        if (j.contains("feasibility")) {
          FeasibilitySummary fs;
          fs.valid = j["feasibility"].at("valid").get<bool>();
          if (j["feasibility"].contains("first_invalid_frame")) {
            fs.first_invalid_frame = j["feasibility"]["first_invalid_frame"].get<std::size_t>();
          }
          ep.feasibility = fs;
        }
        continue;
      }
      EpisodeFrame f;
      f.timestamp = j.at("t").get<double>();
      f.left_pose = pose_from(j.at("left"));
      f.right_pose = pose_from(j.at("right"));
      f.left_width = j.at("left_width").get<double>();
      f.right_width = j.at("right_width").get<double>();
      const auto action = j.at("action").get<std::vector<double>>();
      if (action.size() != kActionDim) {
        throw Error(ErrorCode::DimensionMismatch, "action has " + std::to_string(action.size()) + " entries, expected 16");
      }
      std::copy(action.begin(), action.end(), f.action.begin());
      f.wrist_rgb = j.at("wrist_rgb").get<std::array<std::string, 2>>();
      f.tactile = j.at("tactile").get<std::vector<std::string>>();
      ep.frames.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": " + e.what());
  }
  if (!expected) throw Error(ErrorCode::ParseError, path + ": missing header");
  if (*expected != ep.frames.size()) throw Error(ErrorCode::ParseError, path + ": frame_count disagrees with frames");
  ep.validate();
  return ep;
}

void PyramidManifest::add(ManifestEntry entry) {
  if (entry.id.empty()) throw Error(ErrorCode::InvalidInput, "episode id is empty");
  if (entry.task.empty()) throw Error(ErrorCode::InvalidInput, "episode " + entry.id + " has no task");
  const bool exists = std::any_of(episodes.begin(), episodes.end(), [&](const auto& e) { return e.id == entry.id; });
  if (exists) throw Error(ErrorCode::DuplicateEpisode, "episode '" + entry.id + "' already in manifest");
  episodes.push_back(std::move(entry));
}

std::map<Layer, std::vector<std::string>> PyramidManifest::layers() const {
  std::map<Layer, std::vector<std::string>> out;
  for (const auto& [layer, name] : kLayerNames) out[layer];
  for (const auto& e : episodes) out[e.layer].push_back(e.id);
  return out;
}

std::map<std::string, std::map<Layer, std::size_t>> PyramidManifest::task_counts() const {
  std::map<std::string, std::map<Layer, std::size_t>> out;
  for (const auto& e : episodes) ++out[e.task][e.layer];
  return out;
}

std::string manifest_to_json(const PyramidManifest& manifest) {
  json layers = json::object();
  for (const auto& [layer, ids] : manifest.layers()) layers[to_string(layer)] = ids;
  json counts = json::object();
  for (const auto& [task, per_layer] : manifest.task_counts()) {
    for (const auto& [layer, n] : per_layer) counts[task][to_string(layer)] = n;
  }
  json episodes = json::array();
  for (const auto& e : manifest.episodes) {
    json j = {{"id", e.id}, {"task", e.task}, {"layer", to_string(e.layer)}, {"mode", to_string(e.mode)}};
    if (!e.file.empty()) j["file"] = e.file;
    if (e.checksum) j["checksum"] = hex64(*e.checksum);
    episodes.push_back(std::move(j));
  }
  const json doc = {{"schema_version", manifest.schema_version},
                    {"layers", layers},
                    {"task_counts", counts},
                    {"episodes", episodes}};
  return doc.dump(2) + "\n";
}

PyramidManifest manifest_from_json(const std::string& text) {
  PyramidManifest m;
  json doc;
  try {
    doc = json::parse(text);
    m.schema_version = doc.at("schema_version").get<int>();
    if (m.schema_version != kSchemaVersion) {
      throw Error(ErrorCode::ParseError, "unsupported manifest schema_version " + std::to_string(m.schema_version));
    }
    for (const auto& j : doc.at("episodes")) {
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.task = j.at("task").get<std::string>();
      e.layer = layer_from_string(j.at("layer").get<std::string>());
      e.mode = mode_from_string(j.at("mode").get<std::string>());
      e.file = j.value("file", "");
      if (j.contains("checksum")) e.checksum = parse_hex64(j["checksum"].get<std::string>());
      m.add(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }

  // Stored lists and counts are derived data; reject documents where they drift.
  const auto layers = m.layers();
  if (doc.contains("layers")) {
    for (const auto& [layer, ids] : layers) {
      const auto stored = doc["layers"].value(to_string(layer), std::vector<std::string>{});
      if (stored != ids) throw Error(ErrorCode::InvalidInput, "layer list for " + to_string(layer) + " disagrees with episodes");
    }
  }
  if (doc.contains("task_counts")) {
    for (const auto& [task, per_layer] : m.task_counts()) {
      for (const auto& [layer, n] : per_layer) {
        const auto stored = doc["task_counts"].value(task, json::object()).value(to_string(layer), std::size_t{0});
        if (stored != n) throw Error(ErrorCode::InvalidInput, "count for " + task + "/" + to_string(layer) + " disagrees");
      }
    }
  }
  return m;
}

void write_manifest(const PyramidManifest& manifest, const std::string& path) {
  write_file(path, manifest_to_json(manifest));
}

PyramidManifest read_manifest(const std::string& path, bool verify_files) {
  PyramidManifest m = manifest_from_json(read_file(path));
  if (!verify_files) return m;
  const auto dir = std::filesystem::path(path).parent_path();
  for (const auto& e : m.episodes) {
    if (e.file.empty()) continue;
    if (!e.checksum) throw Error(ErrorCode::ChecksumMismatch, "episode " + e.id + " has a file but no checksum");
    const auto actual = file_checksum((dir / e.file).string());
    if (actual != *e.checksum) {
      throw Error(ErrorCode::ChecksumMismatch,
                  "episode " + e.id + ": expected " + hex64(*e.checksum) + ", file has " + hex64(actual));
    }
  }
  return m;
}

PyramidStats pyramid_stats(const PyramidManifest& manifest) {
  PyramidStats s;
  for (const auto& [layer, ids] : manifest.layers()) s.per_layer[layer] = ids.size();
  for (const auto& e : manifest.episodes) {
    auto& t = s.per_task[e.task];
    switch (e.layer) {
      case Layer::BaseSingleArm: ++t.base; break;
      case Layer::TaskBimanual: ++t.demos; break;
      case Layer::RecoveryOnline: ++t.recovery_online; break;
      case Layer::RecoveryOffline: ++t.recovery_offline; break;
      case Layer::NominalExtra: ++t.nominal_extra; break;
    }
  }
  for (auto& [task, t] : s.per_task) {
    if (t.demos > 0) {
      t.recovery_ratio = static_cast<double>(t.recovery_online + t.recovery_offline) / static_cast<double>(t.demos);
    }
  }
  return s;
}

std::vector<ManifestEntry> stage_filter(const PyramidManifest& manifest, Stage stage) {
  std::vector<ManifestEntry> out;
  for (const auto& e : manifest.episodes) {
    bool keep = false;
    switch (stage) {
      case Stage::Pretrain: keep = e.layer == Layer::BaseSingleArm; break;
      case Stage::Task: keep = e.layer == Layer::TaskBimanual; break;
      case Stage::Refine:
        keep = e.layer == Layer::TaskBimanual || e.layer == Layer::RecoveryOnline || e.layer == Layer::RecoveryOffline;
        break;
    }
    if (keep) out.push_back(e);
  }
  return out;
}

std::vector<ManifestEntry> stage_filter(const PyramidManifest& manifest, const std::string& stage) {
  return stage_filter(manifest, stage_from_string(stage));
}

double contrastive_loss(const std::vector<Eigen::VectorXd>& tactile, const std::vector<Eigen::VectorXd>& visual,
                        double tau) {
  if (!(tau > 0) || !std::isfinite(tau)) throw Error(ErrorCode::NonPositiveTemperature, "temperature must be positive");
  const std::size_t b = tactile.size();
  if (b == 0) throw Error(ErrorCode::DimensionMismatch, "batch is empty");
  if (visual.size() != b + 1) {
    throw Error(ErrorCode::DimensionMismatch, "need B+1 = " + std::to_string(b + 1) + " visual embeddings, got " +
                                                  std::to_string(visual.size()));
  }
  const auto dim = tactile.front().size();
  for (std::size_t i = 0; i < b; ++i) {
    if (tactile[i].size() != dim) throw Error(ErrorCode::DimensionMismatch, "tactile embedding sizes differ");
  }
  for (const auto& v : visual) {
    if (v.size() != dim) throw Error(ErrorCode::DimensionMismatch, "visual and tactile embedding sizes differ");
  }
  for (std::size_t i = 0; i < b; ++i) check_unit(tactile[i], "tactile", i);
  for (std::size_t i = 0; i <= b; ++i) check_unit(visual[i], "visual", i);

  double total = 0.0;
  std::vector<double> all(b + 1);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j <= b; ++j) all[j] = visual[j].dot(tactile[i]) / tau;
    const double positives = log_sum_exp({all[i], all[i + 1]});
    total += positives - log_sum_exp(all);
  }
  return -total / static_cast<double>(b);
}

double action_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.cols() != kActionDim || target.cols() != kActionDim || pred.rows() != target.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "action tensors must both be T x 16");
  }
  return (pred - target).cwiseAbs().sum();
}

}  // namespace hdkit::pyramid
