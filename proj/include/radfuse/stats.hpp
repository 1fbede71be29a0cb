#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace radfuse {

inline constexpr std::size_t kNumStats = 14;

/// The 14 summary measures computed over every transform output, in canonical order.
struct StatVector14 {
  double area = 0;
  double mean = 0;
  double std = 0;
  double skewness = 0;
  double kurtosis = 0;
  double energy = 0;
  double entropy = 0;
  double max = 0;
  double mad = 0;
  double median = 0;
  double min = 0;
  double range = 0;
  double rms = 0;
  double uniformity = 0;

  std::array<double, kNumStats> to_array() const {
    return {area, mean, std, skewness, kurtosis, energy, entropy,
            max,  mad,  median, min, range, rms, uniformity};
  }
};

inline constexpr std::array<std::string_view, kNumStats> kStatNames{
    "area", "mean", "std",    "skewness", "kurtosis", "energy", "entropy",
    "max",  "mad",  "median", "min",      "range",    "rms",    "uniformity"};

/// Population moments (N denominator), excess kurtosis, base-2 entropy of the
/// unique-value frequency distribution. Skewness and kurtosis are 0 when the
/// second central moment is below 1e-12.
///
/// Throws Error(argument) on an empty vector or a non-finite entry.
StatVector14 compute_stats(std::span<const double> p);

}  // namespace radfuse
