#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace radfuse {

inline constexpr int kImageSize = 224;

/// Decoded image with interleaved 8-bit channels (1 = gray, 3 = R,G,B).
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int row, int col, int channel = 0) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + channel];
  }
};

/// Single-channel 8-bit image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::uint8_t at(int row, int col) const {
    return data[static_cast<std::size_t>(row) * width + col];
  }
  std::uint8_t& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  std::span<const std::uint8_t> pixels() const noexcept { return data; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Height x width x 3 tensor (HWC), channel order B,G,R, centered by per-channel means.
struct CenteredRgbTensor {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  static constexpr int channels = 3;

  float at(int row, int col, int channel) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + channel];
  }

  friend bool operator==(const CenteredRgbTensor&, const CenteredRgbTensor&) = default;
};

}  // namespace radfuse
