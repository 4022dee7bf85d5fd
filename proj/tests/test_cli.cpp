#include <gtest/gtest.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "hdkit/cli.hpp"
#include "hdkit/io.hpp"
#include "hdkit/mechanism.hpp"

using namespace hdkit;
using json = nlohmann::json;

namespace {

const std::string kConfigs = HDKIT_CONFIG_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "hdkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json read_json(const std::string& path) { return json::parse(io::read_text(path)); }

std::vector<json> read_lines(const std::string& path) {
  std::vector<json> out;
  std::istringstream in(io::read_text(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace

TEST(Cli, TrackReproducesNoiselessTruth) {
  fixtures::TempDir dir("hdkit-cli-track");
  const auto stream = dir.file("stream.jsonl"), model = dir.file("model.json"), truth = dir.file("truth.jsonl");
  ASSERT_EQ(run({"synth", "markers", "--seed", "5", "--frames", "120", "--sigma", "0", "--stream", stream, "--model",
                 model, "--truth", truth})
                .code,
            0);
  const auto r = run({"track", "--model", model, "--stream", stream, "--out", dir.file("poses.jsonl"), "--report",
                      dir.file("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto got = read_lines(dir.file("poses.jsonl"));
  const auto want = read_lines(truth);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[i]["pos"][k].get<double>(), want[i]["pos"][k].get<double>(), 1e-9);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(got[i]["rot"][k].get<double>(), want[i]["rot"][k].get<double>(), 1e-9);
  }
  EXPECT_EQ(read_json(dir.file("report.json"))["poses"], 120);
}

TEST(Cli, TrackEmptyStreamWarns) {
  fixtures::TempDir dir("hdkit-cli-empty");
  const auto model = dir.file("model.json");
  ASSERT_EQ(run({"synth", "markers", "--seed", "1", "--frames", "3", "--stream", dir.file("s.jsonl"), "--model", model})
                .code,
            0);
  io::write_text(dir.file("empty.jsonl"), "");
  const auto r = run({"track", "--model", model, "--stream", dir.file("empty.jsonl"), "--out", dir.file("out.jsonl")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_EQ(io::read_text(dir.file("out.jsonl")), "");
}

TEST(Cli, TrackMalformedLineIsInputError) {
  fixtures::TempDir dir("hdkit-cli-bad");
  const auto model = dir.file("model.json"), stream = dir.file("s.jsonl");
  ASSERT_EQ(run({"synth", "markers", "--seed", "1", "--frames", "3", "--stream", stream, "--model", model}).code, 0);
  std::ofstream(stream, std::ios::app) << "{\"t\": 1.0, \"points\": [[0, 0\n";
  const auto r = run({"track", "--model", model, "--stream", stream, "--out", dir.file("out.jsonl")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(":4"), std::string::npos) << r.err;
}

TEST(Cli, ValidateCleanAndCorrupted) {
  fixtures::TempDir dir("hdkit-cli-validate");
  const auto chain = kConfigs + "/test_chain.ini", limits = kConfigs + "/limits.ini";
  ASSERT_EQ(run({"synth", "episode", "--seed", "3", "--left", dir.file("l.jsonl"), "--right", dir.file("r.jsonl")}).code, 0);
  auto r = run({"validate", "--left", dir.file("l.jsonl"), "--right", dir.file("r.jsonl"), "--chain", chain, "--limits",
                limits});
  EXPECT_EQ(r.code, 0) << r.out << r.err;

  ASSERT_EQ(run({"synth", "episode", "--seed", "3", "--left", dir.file("l2.jsonl"), "--right", dir.file("r2.jsonl"),
                 "--inject", "tcp_jump", "--frame", "20", "--magnitude", "0.01", "--arm", "right"})
                .code,
            0);
  r = run({"validate", "--left", dir.file("l2.jsonl"), "--right", dir.file("r2.jsonl"), "--chain", chain, "--limits",
           limits, "--report", dir.file("report.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("frame 20"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("tcp_overspeed"), std::string::npos) << r.out;
  const auto report = read_json(dir.file("report.json"));
  EXPECT_EQ(report["first_invalid_frame"], 20);
  EXPECT_EQ(report["valid"], false);

  io::write_text(dir.file("limits.ini"), "[joint_limits_deg]\nj1 = -360 360\n");
  r = run({"validate", "--left", dir.file("l.jsonl"), "--right", dir.file("r.jsonl"), "--chain", chain, "--limits",
           dir.file("limits.ini")});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, AdaptParallel) {
  fixtures::TempDir dir("hdkit-cli-parallel");
  const auto r = run({"adapt", "parallel", "--config", kConfigs + "/parallel.ini", "--out", dir.file("p.ini")});
  ASSERT_EQ(r.code, 0) << r.err;
  boost::property_tree::ptree tree;
  boost::property_tree::read_ini(dir.file("p.ini"), tree);
  EXPECT_EQ(tree.get<double>("parallel.l_b"), 40.0);
}

TEST(Cli, AdaptFlexionRoundTrip) {
  fixtures::TempDir dir("hdkit-cli-flexion");
  const auto r = run({"adapt", "flexion", "--config", kConfigs + "/flexion.ini", "--out", dir.file("f.ini"), "--report",
                      dir.file("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_json(dir.file("report.json"));
  EXPECT_LT(report["residual_x1_mm"].get<double>(), 1e-6);
  EXPECT_LT(report["residual_w_mm"].get<double>(), 1e-6);

  boost::property_tree::ptree tree;
  boost::property_tree::read_ini(dir.file("f.ini"), tree);
  const mechanism::FlexionParams p{tree.get<double>("flexion.l1"), tree.get<double>("flexion.l2"),
                                   tree.get<double>("flexion.l3"), tree.get<double>("flexion.d"),
                                   tree.get<double>("flexion.x3"),  tree.get<double>("flexion.x4"),
                                   tree.get<double>("flexion.stroke_max")};
  EXPECT_NEAR(mechanism::flexion_forward(p, p.stroke_max).x1, report["config"]["x1_max"].get<double>(), 1e-6);
}

TEST(Cli, AdaptFlexionUnreachableTarget) {
  fixtures::TempDir dir("hdkit-cli-flexion-bad");
  const auto r = run({"adapt", "flexion", "--config", kConfigs + "/flexion.ini", "--out", dir.file("f.ini"), "--x1-max",
                      "75"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("TargetUnreachable"), std::string::npos) << r.err;
}

TEST(Cli, PyramidReferenceCounts) {
  fixtures::TempDir dir("hdkit-cli-pyramid");
  const auto manifest = dir.file("manifest.json");
  ASSERT_EQ(run({"pyramid", "init", "--manifest", manifest}).code, 0);
  for (const auto& c : fixtures::kTaskCounts) {
    ASSERT_EQ(run({"pyramid", "add", "--manifest", manifest, "--id", std::string(c.task) + "-demo", "--task", c.task,
                   "--layer", "task_bimanual", "--count", std::to_string(c.demos)})
                  .code,
              0);
    ASSERT_EQ(run({"pyramid", "add", "--manifest", manifest, "--id", std::string(c.task) + "-rec", "--task", c.task,
                   "--layer", "recovery_online", "--mode", "portable", "--count", std::to_string(c.recovery)})
                  .code,
              0);
  }
  const auto r = run({"pyramid", "stats", "--manifest", manifest, "--report", dir.file("stats.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto stats = read_json(dir.file("stats.json"));
  EXPECT_NEAR(stats["per_task"]["herbal_transfer"]["recovery_ratio"].get<double>(), 0.106, 5e-4);
  EXPECT_NEAR(stats["per_task"]["cable_mounting"]["recovery_ratio"].get<double>(), 0.095, 5e-4);
  EXPECT_NEAR(stats["per_task"]["binder_clip_removal"]["recovery_ratio"].get<double>(), 0.093, 5e-4);
  EXPECT_NEAR(stats["per_task"]["dish_washing"]["recovery_ratio"].get<double>(), 0.102, 5e-4);

  const auto stage = run({"pyramid", "stage", "--manifest", manifest, "--stage", "pretrain"});
  EXPECT_EQ(stage.code, 0);
  EXPECT_EQ(stage.out, "");

  const auto dup = run({"pyramid", "add", "--manifest", manifest, "--id", "dish_washing-demo-0000", "--task", "dish_washing"});
  EXPECT_EQ(dup.code, 2);
  EXPECT_NE(dup.err.find("DuplicateEpisode"), std::string::npos) << dup.err;

  EXPECT_EQ(run({"pyramid", "stage", "--manifest", manifest, "--stage", "warmup"}).code, 2);
}

TEST(Cli, ExperimentReports) {
  fixtures::TempDir dir("hdkit-cli-experiment");
  io::write_text(dir.file("tracking.json"),
                 R"({"experiment": "tracking", "trials": 5, "frames": 120, "methods": ["object_based"]})");
  auto r = run({"experiment", "--config", dir.file("tracking.json"), "--seed", "9", "--report", dir.file("t.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = read_json(dir.file("t.json"));
  EXPECT_EQ(t["results"]["object_based"]["success_rate"], 1.0);
  EXPECT_EQ(t["config"]["seed"], 9);

  io::write_text(dir.file("validity.json"),
                 R"({"experiment": "validity", "n_clean": 3, "n_corrupted": 3,
                     "specs": [{"kind": "time_gap", "frame": 40, "magnitude": 0.5}]})");
  r = run({"experiment", "--config", dir.file("validity.json"), "--seed", "2", "--report", dir.file("v.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto v = read_json(dir.file("v.json"));
  EXPECT_EQ(v["accept_rate_clean"], 1.0);
  EXPECT_EQ(v["reject_rate_corrupted"], 1.0);

  // Byte-identical reports on a rerun.
  const auto first = io::read_text(dir.file("v.json"));
  ASSERT_EQ(run({"experiment", "--config", dir.file("validity.json"), "--seed", "2", "--report", dir.file("v.json")}).code, 0);
  EXPECT_EQ(io::read_text(dir.file("v.json")), first);

  io::write_text(dir.file("unknown.json"), R"({"experiment": "calibration"})");
  EXPECT_EQ(run({"experiment", "--config", dir.file("unknown.json"), "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"experiment", "--config", dir.file("tracking.json")}).code, 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"synth", "episode", "--left", "a", "--right", "b"}).code, 2);
}
