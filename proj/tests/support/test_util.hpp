#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "radfuse/image.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("radfuse_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

/// Uniform image with `levels` distinct gray values spread over [0,255].
inline radfuse::GrayImage random_image(int w, int h, int levels, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, levels - 1);
  radfuse::GrayImage img(w, h);
  for (auto& v : img.data) {
    v = static_cast<std::uint8_t>(levels == 1 ? 0 : pick(rng) * 255 / (levels - 1));
  }
  return img;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1.0});
  return std::abs(a - b) / scale;
}

}  // namespace testutil
