#include "radfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "radfuse/common.hpp"

namespace radfuse {

StatVector14 compute_stats(std::span<const double> p) {
  if (p.empty()) fail(ErrorKind::argument, "compute_stats: empty input");
  for (double v : p) {
    if (!std::isfinite(v)) fail(ErrorKind::argument, "compute_stats: non-finite input");
  }

  const auto n = static_cast<double>(p.size());
  StatVector14 s;

  double sum = 0.0;
  double sumsq = 0.0;
  for (double v : p) {
    sum += v;
    sumsq += v * v;
  }
  s.area = sum;
  s.energy = sumsq;
  s.mean = sum / n;
  s.rms = std::sqrt(sumsq / n);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0, abs_dev = 0.0;
  for (double v : p) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
    abs_dev += std::abs(d);
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.std = std::sqrt(m2);
  s.mad = abs_dev / n;
  if (m2 >= 1e-12) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }

  std::vector<double> sorted(p.begin(), p.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.range = s.max - s.min;
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

  // Frequencies of unique values, normalized to sum 1.
  double entropy = 0.0;
  double uniformity = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double freq = static_cast<double>(j - i) / n;
    entropy -= freq * std::log2(freq);
    uniformity += freq * freq;
    i = j;
  }
  s.entropy = entropy == 0.0 ? 0.0 : entropy;  // avoid -0
  s.uniformity = uniformity;
  return s;
}

}  // namespace radfuse
