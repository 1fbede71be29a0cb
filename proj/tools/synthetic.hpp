#pragma once

#include <cstdint>
#include <filesystem>

#include "radfuse/common.hpp"
#include "radfuse/image.hpp"
#include "radfuse/pipeline.hpp"

namespace radfuse::synth {

/// covid -> smoothed noise, normal -> oriented stripes, pneumonia -> gaussian blobs.
/// Contrast, brightness, scale and additive noise vary per seed.
GrayImage texture_image(ClassLabel label, std::uint64_t seed, int size = kImageSize);

void write_png(const GrayImage& img, const std::filesystem::path& path);

struct DatasetOptions {
  std::size_t per_class = 100;
  std::uint64_t seed = 1;
  int size = kImageSize;
};

/// Writes `<root>/<label>/<label>_NNNN.png` plus `<root>/manifest.csv` and returns the dataset.
LabeledDataset write_texture_dataset(const std::filesystem::path& root, const DatasetOptions& opts);

inline constexpr std::size_t kStandinDeepWidth = 4096;

/// Fixed bank of 16 seeded 5x5 filters over a 64x64 downsample, ReLU, 4x4 mean pooling:
/// 16 x 16 x 16 = 4096 non-negative values.
class RandomConvFeatures {
public:
  explicit RandomConvFeatures(std::uint64_t seed);
  std::vector<float> operator()(const GrayImage& img) const;

private:
  std::vector<float> filters_;  // 16 x 5 x 5
};

/// Stand-in deep feature file (RFF1, f32) keyed by sample id.
void write_standin_deep_features(const LabeledDataset& ds, const std::filesystem::path& path,
                                 std::uint64_t seed, int jobs = 1);

}  // namespace radfuse::synth
