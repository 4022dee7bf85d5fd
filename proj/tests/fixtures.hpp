#pragma once

// Shared test data and helpers.

#include <array>
#include <filesystem>
#include <random>
#include <string>

#include "hdkit/pyramid.hpp"

namespace fixtures {

struct TaskCounts {
  const char* task;
  std::size_t demos;
  std::size_t recovery;
};

// Bimanual demonstrations and online recovery trajectories per task.
inline constexpr std::array<TaskCounts, 4> kTaskCounts{{
    {"herbal_transfer", 94, 10},
    {"cable_mounting", 221, 21},
    {"binder_clip_removal", 107, 10},
    {"dish_washing", 98, 10},
}};

inline hdkit::pyramid::PyramidManifest reference_manifest() {
  using namespace hdkit::pyramid;
  PyramidManifest m;
  for (const auto& c : kTaskCounts) {
    for (std::size_t i = 0; i < c.demos; ++i) {
      m.add({std::string(c.task) + "-demo-" + std::to_string(i), c.task, Layer::TaskBimanual, Mode::Precision, "", {}});
    }
    for (std::size_t i = 0; i < c.recovery; ++i) {
      m.add({std::string(c.task) + "-rec-" + std::to_string(i), c.task, Layer::RecoveryOnline, Mode::Portable, "", {}});
    }
  }
  return m;
}

// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (name + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
