#include "hdkit/cli.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "hdkit/error.hpp"
#include "hdkit/harness.hpp"
#include "hdkit/io.hpp"
#include "hdkit/mechanism.hpp"
#include "hdkit/pyramid.hpp"

namespace hdkit::cli {
namespace {

using nlohmann::json;
namespace pt = boost::property_tree;

void write_report(const std::string& path, const json& report) {
  if (!path.empty()) io::write_text(path, report.dump(2) + "\n");
}

pt::ptree read_ini(const std::string& path) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(path, tree);
  } catch (const pt::ptree_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return tree;
}

double ini_number(const pt::ptree& tree, const std::string& key, std::optional<double> override_value = std::nullopt) {
  if (override_value) return *override_value;
  const auto v = tree.get_optional<std::string>(key);
  if (!v) throw Error(ErrorCode::ConfigError, "missing config key " + key);
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "config key " + key + " is not a number: '" + *v + "'");
  }
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---- track -----------------------------------------------------------------

struct TrackOptions {
  std::string model, stream, out, report;
};

int cmd_track(const TrackOptions& o, std::ostream& out, std::ostream& err) {
  const io::ModelFile mf = io::read_model(o.model);
  const auto frames = io::read_marker_stream(o.stream);

  std::optional<geometry::RigidTransform> local;
  if (mf.side) {
    std::map<std::string, geometry::Vec3> labeled;
    for (std::size_t i = 0; i < mf.model.size(); ++i) labeled[mf.model.ids()[i]] = mf.model.reference_positions()[i];
    local = tracking::construct_flange_frame(*mf.side, labeled);
  }

  tracking::MarkerTracker tracker(mf.model);
  std::string lines;
  std::size_t poses = 0, occluded = 0, ambiguous = 0, recovered = 0;
  json failures = json::array();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto r = tracker.track(frames[f]);
    occluded += r.assignment.occluded_markers().size();
    recovered += r.recovered.size();
    ambiguous += r.ambiguous ? 1 : 0;
    if (!r.pose) {
      failures.push_back({{"frame", f}, {"t", frames[f].timestamp}, {"reason", r.ambiguous ? "ambiguous" : "too_few_markers"}});
      continue;
    }
    const auto pose = local ? geometry::compose(r.pose->pose, *local) : r.pose->pose;
    json line = json::parse(io::pose_line(frames[f].timestamp, pose));
    line["rms"] = r.pose->rms;
    line["assigned"] = r.assignment.assigned_count();
    lines += line.dump() + "\n";
    ++poses;
  }
  io::write_text(o.out, lines);
  if (frames.empty()) err << "warning: marker stream " << o.stream << " is empty\n";

  write_report(o.report, {{"config", {{"model", o.model}, {"stream", o.stream}, {"out", o.out}}},
                          {"frames", frames.size()},
                          {"poses", poses},
                          {"occluded_marker_frames", occluded},
                          {"recovered_markers", recovered},
                          {"ambiguous_frames", ambiguous},
                          {"failures", failures}});
  out << "tracked " << poses << "/" << frames.size() << " frames; " << ambiguous << " ambiguous, " << occluded
      << " occluded marker observations\n";
  return kOk;
}

// ---- build-model -------------------------------------------------------------

struct BuildModelOptions {
  std::string first, stream, out, side;
};

int cmd_build_model(const BuildModelOptions& o, std::ostream& out) {
  const io::ModelFile first = io::read_model(o.first);
  const tracking::LabeledPoints labeled{first.model.ids(), first.model.reference_positions()};
  const auto model = tracking::build_model(labeled, io::read_marker_stream(o.stream));
  std::optional<tracking::Side> side = first.side;
  if (!o.side.empty()) side = o.side == "left" ? tracking::Side::Left : tracking::Side::Right;
  io::write_model(model, side, o.out);
  out << "model with " << model.size() << " markers written to " << o.out << "\n";
  return kOk;
}

// ---- transfer -----------------------------------------------------------------

struct TransferOptions {
  std::string poses, widths, out, report, arm = "right", source = "mocap_240hz";
  double rate = transfer::kDefaultRate;
  std::vector<double> offset_pos{0, 0, 0};
  std::vector<double> offset_rot{1, 0, 0, 0};
};

int cmd_transfer(const TransferOptions& o, std::ostream& out) {
  const auto source = o.source == "vr_100hz" ? transfer::Source::Vr100Hz : transfer::Source::Mocap240Hz;
  const auto offset = geometry::RigidTransform::from_quaternion(
      Eigen::Vector4d(o.offset_rot[0], o.offset_rot[1], o.offset_rot[2], o.offset_rot[3]),
      geometry::Vec3(o.offset_pos[0], o.offset_pos[1], o.offset_pos[2]));
  const auto traj = transfer::build_flange_trajectory(io::read_pose_stream(o.poses, source), offset, io::read_widths(o.widths),
                                                      o.rate, transfer::arm_from_string(o.arm));
  io::write_trajectory(traj, o.out);
  write_report(o.report, {{"config",
                           {{"poses", o.poses},
                            {"widths", o.widths},
                            {"out", o.out},
                            {"rate", o.rate},
                            {"arm", o.arm},
                            {"source", o.source},
                            {"offset_pos", o.offset_pos},
                            {"offset_rot", o.offset_rot}}},
                          {"samples", traj.samples.size()},
                          {"start", traj.samples.front().timestamp},
                          {"end", traj.samples.back().timestamp}});
  out << traj.samples.size() << " flange samples at " << o.rate << " Hz written to " << o.out << "\n";
  return kOk;
}

// ---- validate -----------------------------------------------------------------

struct ValidateOptions {
  std::string left, right, chain, limits, report, log;
};

json limits_json(const feasibility::Limits& l) {
  json joints = json::object();
  for (int i = 0; i < feasibility::kJoints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    joints["j" + std::to_string(i + 1)] = {l.joints.lower_deg[k], l.joints.upper_deg[k]};
  }
  return {{"joint_limits_deg", joints},
          {"joint_max_deg_s", l.velocity.joint_max_deg_s},
          {"tcp_max_mm_s", l.velocity.tcp_max_mm_s},
          {"max_gap_s", l.velocity.max_gap_s}};
}

int cmd_validate(const ValidateOptions& o, std::ostream& out) {
  const auto limits = feasibility::load_limits(o.limits);
  const auto left_chain = feasibility::load_chain(o.chain, transfer::Arm::Left);
  const auto right_chain = feasibility::load_chain(o.chain, transfer::Arm::Right);
  const auto verdict =
      feasibility::validate_episode(io::read_trajectory(o.left), io::read_trajectory(o.right), left_chain, right_chain, limits);

  const std::string log_text = io::verdict_log(verdict);
  if (!o.log.empty()) io::write_text(o.log, log_text);
  json log = json::array();
  std::istringstream lines(log_text);
  for (std::string line; std::getline(lines, line);) log.push_back(json::parse(line));
  json report = {{"config", {{"left", o.left}, {"right", o.right}, {"chain", o.chain}, {"limits", limits_json(limits)}}},
                 {"valid", verdict.valid},
                 {"frames", verdict.log.size() / 2},
                 {"log", log}};
  report["first_invalid_frame"] = verdict.first_invalid_frame ? json(*verdict.first_invalid_frame) : json(nullptr);
  write_report(o.report, report);

  if (verdict.valid) {
    out << "valid: " << verdict.log.size() / 2 << " frames executable on both arms\n";
    return kOk;
  }
  out << "invalid: first failure at frame " << *verdict.first_invalid_frame;
  for (const auto& e : verdict.log) {
    if (e.frame == *verdict.first_invalid_frame && !e.verdict.ok()) {
      out << " (" << transfer::to_string(e.arm) << ": " << feasibility::to_string(e.verdict.status) << ")";
    }
  }
  out << "\n";
  return kInvalid;
}

// ---- adapt --------------------------------------------------------------------

struct AdaptOptions {
  std::string config, out, report;
  std::optional<double> x1_max, w_max;
};

int cmd_adapt_flexion(const AdaptOptions& o, std::ostream& out) {
  const auto tree = read_ini(o.config);
  mechanism::FlexionFixed fixed{ini_number(tree, "fixed.l1"), ini_number(tree, "fixed.l2"), ini_number(tree, "fixed.l3"),
                                ini_number(tree, "fixed.d"), ini_number(tree, "fixed.x4")};
  mechanism::FlexionTargets targets{ini_number(tree, "targets.x1_max", o.x1_max), ini_number(tree, "targets.w_max", o.w_max)};
  const auto sol = mechanism::flexion_adapt(targets, fixed);
  const auto params = sol.params(fixed);
  const auto at_zero = mechanism::flexion_forward(params, 0.0);
  const auto at_max = mechanism::flexion_forward(params, sol.x2_max);
  const double x1_residual = std::abs(at_max.x1 - targets.x1_max);
  const double w_residual = std::abs(std::max(at_zero.w, at_max.w) - targets.w_max);

  pt::ptree result;
  result.put("flexion.l1", params.l1);
  result.put("flexion.l2", params.l2);
  result.put("flexion.l3", params.l3);
  result.put("flexion.d", params.d);
  result.put("flexion.x3", params.x3);
  result.put("flexion.x4", params.x4);
  result.put("flexion.stroke_max", params.stroke_max);
  pt::write_ini(o.out, result);

  write_report(o.report, {{"config",
                           {{"template", "flexion"},
                            {"l1", fixed.l1},
                            {"l2", fixed.l2},
                            {"l3", fixed.l3},
                            {"d", fixed.d},
                            {"x4", fixed.x4},
                            {"x1_max", targets.x1_max},
                            {"w_max", targets.w_max}}},
                          {"x2_max", sol.x2_max},
                          {"x3", sol.x3},
                          {"stroke_upper", sol.stroke_upper},
                          {"residual_x1_mm", x1_residual},
                          {"residual_w_mm", w_residual}});
  out << "flexion: stroke_max = " << fmt(sol.x2_max, 10) << " mm, x3 = " << fmt(sol.x3, 10) << " mm\n"
      << "forward check residuals: x1 " << fmt(x1_residual, 3) << " mm, w " << fmt(w_residual, 3) << " mm\n";
  return kOk;
}

int cmd_adapt_parallel(const AdaptOptions& o, std::ostream& out) {
  const auto tree = read_ini(o.config);
  const double l_c = ini_number(tree, "fixed.l_c");
  const double w_max = ini_number(tree, "targets.w_max", o.w_max);
  const double l_b = mechanism::parallel_adapt(w_max, l_c);
  const double residual = std::abs(mechanism::parallel_forward({l_c, l_b}) - w_max);

  pt::ptree result;
  result.put("parallel.l_c", l_c);
  result.put("parallel.l_b", l_b);
  pt::write_ini(o.out, result);
  write_report(o.report, {{"config", {{"template", "parallel"}, {"l_c", l_c}, {"w_max", w_max}}},
                          {"l_b", l_b},
                          {"residual_w_mm", residual}});
  out << "parallel: l_b = " << fmt(l_b, 10) << " mm\nforward check residual: w " << fmt(residual, 3) << " mm\n";
  return kOk;
}

// ---- pyramid ------------------------------------------------------------------

struct PyramidOptions {
  std::string manifest, id, task, layer = "task_bimanual", mode = "precision", file, stage, report;
  int count = 0;
};

int cmd_pyramid_init(const PyramidOptions& o, std::ostream& out) {
  if (std::filesystem::exists(o.manifest)) throw Error(ErrorCode::InvalidInput, o.manifest + " already exists");
  pyramid::write_manifest({}, o.manifest);
  out << "initialized empty manifest " << o.manifest << "\n";
  return kOk;
}

int cmd_pyramid_add(const PyramidOptions& o, std::ostream& out) {
  auto m = pyramid::read_manifest(o.manifest);
  const auto layer = pyramid::layer_from_string(o.layer);
  const auto mode = pyramid::mode_from_string(o.mode);
  if (o.count > 0) {
    if (!o.file.empty()) throw Error(ErrorCode::InvalidInput, "--count adds placeholder entries and cannot take --file");
    for (int k = 0; k < o.count; ++k) {
      std::ostringstream id;
      id << o.id << "-" << std::setw(4) << std::setfill('0') << k;
      m.add({id.str(), o.task, layer, mode, "", std::nullopt});
    }
  } else {
    pyramid::ManifestEntry e{o.id, o.task, layer, mode, "", std::nullopt};
    if (!o.file.empty()) {
      const auto dir = std::filesystem::absolute(o.manifest).parent_path();
      const auto rel = std::filesystem::relative(std::filesystem::absolute(o.file), dir);
      (void)pyramid::read_episode(o.file);
      e.file = rel.generic_string();
      e.checksum = pyramid::file_checksum(o.file);
    }
    m.add(std::move(e));
  }
  pyramid::write_manifest(m, o.manifest);
  out << "manifest now holds " << m.episodes.size() << " episodes\n";
  return kOk;
}

int cmd_pyramid_stats(const PyramidOptions& o, std::ostream& out) {
  const auto m = pyramid::read_manifest(o.manifest);
  const auto s = pyramid::pyramid_stats(m);
  json layers = json::object();
  for (const auto& [layer, n] : s.per_layer) layers[pyramid::to_string(layer)] = n;
  json tasks = json::object();
  for (const auto& [task, t] : s.per_task) {
    tasks[task] = {{"base_single_arm", t.base},
                   {"task_bimanual", t.demos},
                   {"recovery_online", t.recovery_online},
                   {"recovery_offline", t.recovery_offline},
                   {"nominal_extra", t.nominal_extra},
                   {"recovery_ratio", t.recovery_ratio ? json(*t.recovery_ratio) : json(nullptr)}};
    out << task << ": " << t.demos << " demos, " << t.recovery_online + t.recovery_offline << " recovery, ratio "
        << (t.recovery_ratio ? fmt(*t.recovery_ratio, 3) : std::string("n/a")) << "\n";
  }
  write_report(o.report, {{"config", {{"manifest", o.manifest}}}, {"per_layer", layers}, {"per_task", tasks}});
  return kOk;
}

int cmd_pyramid_stage(const PyramidOptions& o, std::ostream& out) {
  const auto m = pyramid::read_manifest(o.manifest);
  const auto selected = pyramid::stage_filter(m, o.stage);
  json ids = json::array();
  for (const auto& e : selected) {
    ids.push_back(e.id);
    out << e.id << "\n";
  }
  write_report(o.report, {{"config", {{"manifest", o.manifest}, {"stage", o.stage}}}, {"episodes", ids}});
  return kOk;
}

// ---- experiment / synth ---------------------------------------------------------

struct ExperimentOptions {
  std::string config, report;
  std::optional<std::uint64_t> seed;
};

harness::NoiseProfile profile_from(const json& j, harness::NoiseProfile p) {
  p.sigma = j.value("sigma", p.sigma);
  p.dropout_prob = j.value("dropout_prob", p.dropout_prob);
  p.spurious_rate = j.value("spurious_rate", p.spurious_rate);
  p.burst_length = j.value("burst_length", p.burst_length);
  p.burst_start_prob = j.value("burst_start_prob", p.burst_start_prob);
  p.max_concurrent_occlusions = j.value("max_concurrent_occlusions", p.max_concurrent_occlusions);
  p.validate();
  return p;
}

json profile_json(const harness::NoiseProfile& p) {
  return {{"sigma", p.sigma},
          {"dropout_prob", p.dropout_prob},
          {"spurious_rate", p.spurious_rate},
          {"burst_length", p.burst_length},
          {"burst_start_prob", p.burst_start_prob},
          {"max_concurrent_occlusions", p.max_concurrent_occlusions}};
}

json spec_json(const harness::ViolationSpec& s) {
  return {{"kind", harness::to_string(s.kind)},
          {"frame", s.frame},
          {"magnitude", s.magnitude},
          {"arm", transfer::to_string(s.arm)}};
}

int cmd_experiment(const ExperimentOptions& o, std::ostream& out) {
  if (!o.seed) throw Error(ErrorCode::ConfigError, "--seed is required for experiments");
  json cfg;
  try {
    cfg = json::parse(io::read_text(o.config));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, o.config + ": " + e.what());
  }
  const std::uint64_t seed = *o.seed;
  try {
    const std::string name = cfg.at("experiment").get<std::string>();
    if (name == "tracking") {
      const int trials = cfg.value("trials", 100);
      const auto frames = cfg.value("frames", std::size_t{240});
      const auto profile = profile_from(cfg.value("profile", json::object()), harness::benchmark_profile());
      const auto methods = cfg.value("methods", std::vector<std::string>{"marker_only", "object_based"});
      const auto model = harness::benchmark_model();
      const auto trajectory = harness::benchmark_trajectory(frames);
      json results = json::object();
      for (const auto& m : methods) {
        const auto r = harness::tracking_experiment(model, trajectory, profile, harness::method_from_string(m), trials, seed);
        json trial_list = json::array();
        for (const auto& t : r.trials) {
          trial_list.push_back({{"seed", t.seed},
                                {"success", t.success},
                                {"first_failure_frame", t.first_failure_frame ? json(*t.first_failure_frame) : json(nullptr)}});
        }
        results[m] = {{"success_rate", r.success_rate}, {"trials", trial_list}};
        out << m << ": success rate " << fmt(r.success_rate, 4) << " over " << trials << " trials\n";
      }
      write_report(o.report, {{"config",
                               {{"experiment", name},
                                {"seed", seed},
                                {"trials", trials},
                                {"frames", frames},
                                {"methods", methods},
                                {"profile", profile_json(profile)}}},
                              {"results", results}});
      return kOk;
    }
    if (name == "validity") {
      const int n_clean = cfg.value("n_clean", 50);
      const int n_corrupted = cfg.value("n_corrupted", 50);
      std::vector<harness::ViolationSpec> specs;
      for (const auto& s : cfg.value("specs", json::array())) {
        harness::ViolationSpec spec;
        spec.kind = harness::violation_from_string(s.at("kind").get<std::string>());
        spec.frame = s.at("frame").get<std::size_t>();
        spec.magnitude = s.at("magnitude").get<double>();
        spec.arm = transfer::arm_from_string(s.value("arm", "right"));
        specs.push_back(spec);
      }
      const auto r = harness::validity_experiment(n_clean, n_corrupted, specs, seed);
      json episodes = json::array();
      for (const auto& e : r.episodes) {
        json j = {{"seed", e.seed}, {"corrupted", e.corrupted}, {"valid", e.valid}};
        j["first_invalid_frame"] = e.first_invalid_frame ? json(*e.first_invalid_frame) : json(nullptr);
        if (e.spec) {
          j["spec"] = spec_json(*e.spec);
          j["injected_frame_flagged"] = e.injected_frame_flagged;
        }
        episodes.push_back(std::move(j));
      }
      json spec_list = json::array();
      for (const auto& s : specs) spec_list.push_back(spec_json(s));
      write_report(o.report, {{"config",
                               {{"experiment", name},
                                {"seed", seed},
                                {"n_clean", n_clean},
                                {"n_corrupted", n_corrupted},
                                {"specs", spec_list}}},
                              {"accept_rate_clean", r.accept_rate_clean},
                              {"reject_rate_corrupted", r.reject_rate_corrupted},
                              {"episodes", episodes}});
      out << "clean accept rate " << fmt(r.accept_rate_clean, 4) << ", corrupted reject rate "
          << fmt(r.reject_rate_corrupted, 4) << "\n";
      return kOk;
    }
    throw Error(ErrorCode::ConfigError, "unknown experiment '" + name + "' (expected tracking or validity)");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, o.config + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidInput) throw Error(ErrorCode::ConfigError, e.what());
    throw;
  }
}

struct SynthOptions {
  std::optional<std::uint64_t> seed;
  std::size_t frames = 240;
  double sigma = 0.0;
  std::string stream, model, truth, left, right, inject, arm = "right";
  std::size_t frame = 1;
  double magnitude = 0.01;
};

int cmd_synth_markers(const SynthOptions& o, std::ostream& out) {
  if (!o.seed) throw Error(ErrorCode::ConfigError, "--seed is required");
  const auto model = harness::benchmark_model();
  const auto trajectory = harness::benchmark_trajectory(o.frames);
  harness::NoiseProfile profile;
  profile.sigma = o.sigma;
  const auto stream = harness::generate_marker_stream(model, trajectory, profile, *o.seed);
  io::write_marker_stream(stream.frames, o.stream);
  io::write_model(model, std::nullopt, o.model);
  if (!o.truth.empty()) {
    std::vector<transfer::PoseSample> poses;
    for (std::size_t k = 0; k < trajectory.size(); ++k) poses.push_back({stream.frames[k].timestamp, trajectory[k]});
    io::write_pose_stream(poses, o.truth);
  }
  out << stream.frames.size() << " marker frames written to " << o.stream << "\n";
  return kOk;
}

int cmd_synth_episode(const SynthOptions& o, std::ostream& out) {
  if (!o.seed) throw Error(ErrorCode::ConfigError, "--seed is required");
  const auto arms = harness::DualArm::test_setup();
  auto ep = harness::make_clean_episode(arms, *o.seed);
  if (!o.inject.empty()) {
    harness::ViolationSpec spec{harness::violation_from_string(o.inject), o.frame, o.magnitude, transfer::arm_from_string(o.arm)};
    ep = harness::inject_violation(ep, spec, arms);
  }
  io::write_trajectory(ep.left, o.left);
  io::write_trajectory(ep.right, o.right);
  out << ep.left.samples.size() << " frames per arm written\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hdkit: handheld demonstration toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  TrackOptions track;
  auto* track_cmd = app.add_subcommand("track", "label marker frames and emit poses (JSONL)");
  track_cmd->add_option("--model", track.model, "marker model JSON")->required()->check(CLI::ExistingFile);
  track_cmd->add_option("--stream", track.stream, "marker stream JSONL")->required()->check(CLI::ExistingFile);
  track_cmd->add_option("--out", track.out, "output pose JSONL")->required();
  track_cmd->add_option("--report", track.report, "tracking report JSON");
  track_cmd->callback([&] { action = [&] { return cmd_track(track, out, err); }; });

  BuildModelOptions build;
  auto* build_cmd = app.add_subcommand("build-model", "build a marker model from a labeled frame and a sequence");
  build_cmd->add_option("--first", build.first, "labeled first frame (model JSON layout)")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--stream", build.stream, "unlabeled marker stream JSONL")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--out", build.out, "output model JSON")->required();
  build_cmd->add_option("--side", build.side, "collector side for the local frame")->check(CLI::IsMember({"left", "right"}));
  build_cmd->callback([&] { action = [&] { return cmd_build_model(build, out); }; });

  TransferOptions xfer;
  auto* xfer_cmd = app.add_subcommand("transfer", "map a tracked pose stream to a resampled flange trajectory");
  xfer_cmd->add_option("--poses", xfer.poses, "pose stream JSONL")->required()->check(CLI::ExistingFile);
  xfer_cmd->add_option("--widths", xfer.widths, "gripper width JSONL")->required()->check(CLI::ExistingFile);
  xfer_cmd->add_option("--out", xfer.out, "flange trajectory JSONL")->required();
  xfer_cmd->add_option("--rate", xfer.rate, "output rate (Hz)")->check(CLI::PositiveNumber);
  xfer_cmd->add_option("--arm", xfer.arm)->check(CLI::IsMember({"left", "right"}));
  xfer_cmd->add_option("--source", xfer.source)->check(CLI::IsMember({"mocap_240hz", "vr_100hz"}));
  xfer_cmd->add_option("--offset-pos", xfer.offset_pos, "tracker-to-flange translation x y z (m)")->expected(3);
  xfer_cmd->add_option("--offset-rot", xfer.offset_rot, "tracker-to-flange rotation w x y z")->expected(4);
  xfer_cmd->add_option("--report", xfer.report);
  xfer_cmd->callback([&] { action = [&] { return cmd_transfer(xfer, out); }; });

  ValidateOptions val;
  auto* val_cmd = app.add_subcommand("validate", "check a dual-arm episode for executability");
  val_cmd->add_option("--left", val.left, "left flange trajectory JSONL")->required()->check(CLI::ExistingFile);
  val_cmd->add_option("--right", val.right, "right flange trajectory JSONL")->required()->check(CLI::ExistingFile);
  val_cmd->add_option("--chain", val.chain, "kinematic chain INI")->required()->check(CLI::ExistingFile);
  val_cmd->add_option("--limits", val.limits, "limits INI")->required()->check(CLI::ExistingFile);
  val_cmd->add_option("--report", val.report, "JSON report with the per-frame verdict log");
  val_cmd->add_option("--log", val.log, "verdict log JSONL");
  val_cmd->callback([&] { action = [&] { return cmd_validate(val, out); }; });

  AdaptOptions adapt;
  std::string adapt_template;
  auto* adapt_cmd = app.add_subcommand("adapt", "solve mechanism parameters from target motion requirements");
  adapt_cmd->add_option("template", adapt_template, "flexion or parallel")->required()->check(CLI::IsMember({"flexion", "parallel"}));
  adapt_cmd->add_option("--config", adapt.config, "fixed parameters INI ([fixed], optional [targets])")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--out", adapt.out, "solved parameter INI")->required();
  adapt_cmd->add_option("--x1-max", adapt.x1_max, "fingertip displacement target (mm)");
  adapt_cmd->add_option("--w-max", adapt.w_max, "opening width target (mm)");
  adapt_cmd->add_option("--report", adapt.report);
  adapt_cmd->callback([&] {
    action = [&] { return adapt_template == "flexion" ? cmd_adapt_flexion(adapt, out) : cmd_adapt_parallel(adapt, out); };
  });

  PyramidOptions pyr;
  auto* pyr_cmd = app.add_subcommand("pyramid", "manage the layered episode manifest");
  pyr_cmd->require_subcommand(1);
  auto* pyr_init = pyr_cmd->add_subcommand("init", "create an empty manifest");
  auto* pyr_add = pyr_cmd->add_subcommand("add", "add an episode (or --count placeholder entries)");
  auto* pyr_stats = pyr_cmd->add_subcommand("stats", "per-layer and per-task counts with recovery ratios");
  auto* pyr_stage = pyr_cmd->add_subcommand("stage", "list the episodes used by a training stage");
  for (auto* sub : {pyr_init, pyr_add, pyr_stats, pyr_stage}) sub->add_option("--manifest", pyr.manifest)->required();
  pyr_add->add_option("--id", pyr.id, "episode id (prefix with --count)")->required();
  pyr_add->add_option("--task", pyr.task)->required();
  pyr_add->add_option("--layer", pyr.layer);
  pyr_add->add_option("--mode", pyr.mode);
  pyr_add->add_option("--file", pyr.file, "episode JSONL; its checksum is recorded")->check(CLI::ExistingFile);
  pyr_add->add_option("--count", pyr.count, "add N placeholder entries id-0000..")->check(CLI::NonNegativeNumber);
  pyr_stage->add_option("--stage", pyr.stage, "pretrain, task or refine")->required();
  for (auto* sub : {pyr_stats, pyr_stage}) sub->add_option("--report", pyr.report);
  pyr_init->callback([&] { action = [&] { return cmd_pyramid_init(pyr, out); }; });
  pyr_add->callback([&] { action = [&] { return cmd_pyramid_add(pyr, out); }; });
  pyr_stats->callback([&] { action = [&] { return cmd_pyramid_stats(pyr, out); }; });
  pyr_stage->callback([&] { action = [&] { return cmd_pyramid_stage(pyr, out); }; });

  ExperimentOptions exp;
  auto* exp_cmd = app.add_subcommand("experiment", "run a tracking or validity experiment from a JSON config");
  exp_cmd->add_option("--config", exp.config)->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("--seed", exp.seed, "random seed (required)");
  exp_cmd->add_option("--report", exp.report, "JSON report");
  exp_cmd->callback([&] { action = [&] { return cmd_experiment(exp, out); }; });

  SynthOptions syn;
  auto* syn_cmd = app.add_subcommand("synth", "generate synthetic inputs");
  syn_cmd->require_subcommand(1);
  auto* syn_markers = syn_cmd->add_subcommand("markers", "benchmark marker stream and model");
  auto* syn_episode = syn_cmd->add_subcommand("episode", "clean (optionally corrupted) dual-arm episode");
  for (auto* sub : {syn_markers, syn_episode}) sub->add_option("--seed", syn.seed, "random seed (required)");
  syn_markers->add_option("--frames", syn.frames);
  syn_markers->add_option("--sigma", syn.sigma, "position noise (m)")->check(CLI::NonNegativeNumber);
  syn_markers->add_option("--stream", syn.stream)->required();
  syn_markers->add_option("--model", syn.model)->required();
  syn_markers->add_option("--truth", syn.truth, "ground-truth body poses JSONL");
  syn_episode->add_option("--left", syn.left)->required();
  syn_episode->add_option("--right", syn.right)->required();
  syn_episode->add_option("--inject", syn.inject)
      ->check(CLI::IsMember({"tcp_jump", "joint_limit_excursion", "out_of_reach", "time_gap"}));
  syn_episode->add_option("--frame", syn.frame);
  syn_episode->add_option("--magnitude", syn.magnitude);
  syn_episode->add_option("--arm", syn.arm)->check(CLI::IsMember({"left", "right"}));
  syn_markers->callback([&] { action = [&] { return cmd_synth_markers(syn, out); }; });
  syn_episode->callback([&] { action = [&] { return cmd_synth_episode(syn, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }
  if (!action) return kInputError;

  try {
    return action();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace hdkit::cli
