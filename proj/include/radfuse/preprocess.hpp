#pragma once

#include <array>
#include <filesystem>
#include <utility>

#include "radfuse/image.hpp"

namespace radfuse {

struct ClaheConfig {
  int tiles_x = 8;
  int tiles_y = 8;
  /// Multiple of the mean bin count (tile_pixels / bins); infinity disables clipping.
  double clip_limit = 2.0;
  static constexpr int bins = 256;

  void validate() const;
};

/// ImageNet channel means in B,G,R order.
inline constexpr std::array<double, 3> kImageNetMeansBgr{103.939, 116.779, 123.68};

struct PreprocessConfig {
  ClaheConfig clahe;
  std::array<double, 3> means_bgr = kImageNetMeansBgr;
};

/// Decodes a PNG or JPEG file. Alpha is dropped; 16-bit samples are reduced to 8 bits.
RawImage load_image(const std::filesystem::path& path);

/// Rec.601 luma, rounded to nearest. Single-channel input is returned unchanged.
GrayImage to_grayscale(const RawImage& img);

/// Bilinear resize with half-pixel centers (edge samples clamped).
GrayImage resize_bilinear(const GrayImage& img, int width = kImageSize, int height = kImageSize);

GrayImage clahe(const GrayImage& img, const ClaheConfig& cfg = {});

/// Replicates gray into three channels and subtracts the per-channel means. No scaling.
CenteredRgbTensor to_model_input(const GrayImage& img,
                                 const std::array<double, 3>& means_bgr = kImageNetMeansBgr);

struct PreprocessedImage {
  GrayImage gray;
  CenteredRgbTensor tensor;
};

/// load -> grayscale -> resize(224) -> CLAHE -> (gray, centered tensor).
PreprocessedImage preprocess_image(const std::filesystem::path& path,
                                   const PreprocessConfig& cfg = {});

/// Same as preprocess_image but starting from an already decoded image.
PreprocessedImage preprocess_raw(const RawImage& raw, const PreprocessConfig& cfg = {});

}  // namespace radfuse
