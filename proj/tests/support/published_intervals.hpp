#pragma once

#include <array>
#include <cstddef>

namespace fixtures {

struct PublishedInterval {
  const char* row;
  double metric;
  double half_width;
};

inline constexpr std::size_t kPublishedTestSize = 1029;

// Accuracy and macro F1 with their 95% half-widths, per feature group and per model.
inline constexpr std::array<PublishedInterval, 24> kPublishedIntervals{{
    {"texture accuracy", 0.762, 0.026},        {"texture f1", 0.771, 0.026},
    {"glcm accuracy", 0.896, 0.019},           {"glcm f1", 0.880, 0.020},
    {"gldm accuracy", 0.900, 0.018},           {"gldm f1", 0.894, 0.019},
    {"fft accuracy", 0.818, 0.024},            {"fft f1", 0.809, 0.024},
    {"wavelet accuracy", 0.940, 0.015},        {"wavelet f1", 0.934, 0.015},
    {"lbp accuracy", 0.874, 0.020},            {"lbp f1", 0.880, 0.020},
    {"all handcrafted accuracy", 0.963, 0.012}, {"all handcrafted f1", 0.957, 0.012},
    {"handcrafted svm accuracy", 0.963, 0.012}, {"handcrafted svm f1", 0.957, 0.012},
    {"vgg16 accuracy", 0.982, 0.008},          {"vgg16 f1", 0.983, 0.008},
    {"resnet50 accuracy", 0.983, 0.008},       {"resnet50 f1", 0.984, 0.008},
    {"vgg16 fused accuracy", 0.988, 0.007},    {"vgg16 fused f1", 0.989, 0.006},
    {"resnet50 fused accuracy", 0.987, 0.007}, {"resnet50 fused f1", 0.988, 0.007},
}};

}  // namespace fixtures
