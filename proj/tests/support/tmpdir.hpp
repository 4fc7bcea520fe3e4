#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace testsup {

// Scratch directory removed on scope exit.
struct TmpDir {
  std::filesystem::path path;

  explicit TmpDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace testsup
