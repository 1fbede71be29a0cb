#include "radfuse/handcrafted.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "radfuse/common.hpp"

namespace radfuse {
namespace {

template <typename Range>
std::array<double, kNumStats> stats_of(const Range& values) {
  std::vector<double> p(values.begin(), values.end());
  return compute_stats(p).to_array();
}

void append(std::vector<double>& out, const std::array<double, kNumStats>& block) {
  out.insert(out.end(), block.begin(), block.end());
}

struct Offset {
  int dr, dc;
};

Offset glcm_offset(GlcmDirection dir) {
  switch (dir) {
    case GlcmDirection::deg0: return {0, 1};
    case GlcmDirection::deg45: return {-1, 1};
    case GlcmDirection::deg90: return {-1, 0};
    case GlcmDirection::deg135: return {-1, -1};
  }
  return {0, 1};
}

Offset gldm_offset(GldmDirection dir) {
  switch (dir) {
    case GldmDirection::deg0: return {0, kGldmDistance};
    case GldmDirection::deg90: return {-kGldmDistance, 0};
    case GldmDirection::deg180: return {0, -kGldmDistance};
    case GldmDirection::deg270: return {kGldmDistance, 0};
  }
  return {0, kGldmDistance};
}

// Calls fn(value_at(r,c), value_at(r+dr,c+dc)) for every in-bounds pair.
template <typename Fn>
void for_each_pair(const GrayImage& img, Offset off, Fn&& fn) {
  const int r0 = std::max(0, -off.dr), r1 = std::min(img.height, img.height - off.dr);
  const int c0 = std::max(0, -off.dc), c1 = std::min(img.width, img.width - off.dc);
  for (int r = r0; r < r1; ++r) {
    const std::uint8_t* row = img.data.data() + static_cast<std::size_t>(r) * img.width;
    const std::uint8_t* other =
        img.data.data() + static_cast<std::size_t>(r + off.dr) * img.width + off.dc;
    for (int c = c0; c < c1; ++c) fn(row[c], other[c]);
  }
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::string_view to_string(FeatureGroup group) noexcept {
  switch (group) {
    case FeatureGroup::texture: return "texture";
    case FeatureGroup::glcm: return "glcm";
    case FeatureGroup::gldm: return "gldm";
    case FeatureGroup::fft: return "fft";
    case FeatureGroup::wavelet: return "wavelet";
    case FeatureGroup::lbp: return "lbp";
  }
  return "texture";
}

FeatureGroup parse_group(std::string_view name) {
  std::string lower(name);
  for (char& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (FeatureGroup g : kAllGroups) {
    if (to_string(g) == lower) return g;
  }
  fail(ErrorKind::config, "unknown feature group: " + std::string(name));
}

std::size_t group_width(FeatureGroup group) noexcept {
  switch (group) {
    case FeatureGroup::texture:
    case FeatureGroup::fft:
      return kNumStats;
    case FeatureGroup::wavelet:
      return 8 * kNumStats;
    case FeatureGroup::glcm:
    case FeatureGroup::gldm:
    case FeatureGroup::lbp:
      return 4 * kNumStats;
  }
  return 0;
}

std::vector<FeatureGroup> canonical_groups(std::span<const FeatureGroup> groups) {
  std::vector<FeatureGroup> out;
  for (FeatureGroup g : kAllGroups) {
    if (std::find(groups.begin(), groups.end(), g) != groups.end()) out.push_back(g);
  }
  return out;
}

std::size_t groups_width(std::span<const FeatureGroup> groups) noexcept {
  std::size_t w = 0;
  for (FeatureGroup g : groups) w += group_width(g);
  return w;
}

std::uint64_t GlcmMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

GlcmMatrix glcm_matrix(const GrayImage& img, GlcmDirection dir) {
  GlcmMatrix m;
  for_each_pair(img, glcm_offset(dir), [&](std::uint8_t a, std::uint8_t b) {
    ++m.counts[static_cast<std::size_t>(a) * GlcmMatrix::levels + b];
  });
  return m;
}

GldmHistogram gldm_histogram(const GrayImage& img, GldmDirection dir) {
  const Offset off = gldm_offset(dir);
  if ((off.dc != 0 && img.width <= kGldmDistance) || (off.dr != 0 && img.height <= kGldmDistance)) {
    fail(ErrorKind::argument, "gldm_histogram: image too small for displacement " +
                                  std::to_string(kGldmDistance));
  }
  std::array<std::uint64_t, 256> counts{};
  std::uint64_t pairs = 0;
  for_each_pair(img, off, [&](std::uint8_t a, std::uint8_t b) {
    ++counts[a > b ? a - b : b - a];
    ++pairs;
  });
  GldmHistogram h{};
  for (std::size_t d = 0; d < h.size(); ++d) {
    h[d] = static_cast<double>(counts[d]) / static_cast<double>(pairs);
  }
  return h;
}

std::vector<double> fft_magnitude(const GrayImage& img) {
  const int h = img.height, w = img.width;
  const std::size_t n = img.size();
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (buf == nullptr) fail(ErrorKind::internal, "fftw_malloc failed");
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(h, w, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = img.data[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(plan);

  std::vector<double> mag(n);
  for (int r = 0; r < h; ++r) {
    const int sr = (r + h / 2) % h;
    for (int c = 0; c < w; ++c) {
      const int sc = (c + w / 2) % w;
      const auto& z = buf[static_cast<std::size_t>(r) * w + c];
      mag[static_cast<std::size_t>(sr) * w + sc] = std::hypot(z[0], z[1]);
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return mag;
}

Subband to_subband(const GrayImage& img) {
  Subband s{img.width, img.height, std::vector<double>(img.data.begin(), img.data.end())};
  return s;
}

Dwt2Level haar_dwt2(const Subband& in) {
  if (in.width < 1 || in.height < 1) fail(ErrorKind::argument, "haar_dwt2: empty input");
  const int ow = (in.width + 1) / 2;
  const int oh = (in.height + 1) / 2;
  Dwt2Level out;
  for (Subband* s : {&out.approx, &out.horizontal, &out.vertical, &out.diagonal}) {
    s->width = ow;
    s->height = oh;
    s->data.resize(static_cast<std::size_t>(ow) * oh);
  }
  auto at = [&](int r, int c) {
    // symmetric extension past the last sample
    r = std::min(r, in.height - 1);
    c = std::min(c, in.width - 1);
    return in.data[static_cast<std::size_t>(r) * in.width + c];
  };
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const double a = at(2 * i, 2 * j), b = at(2 * i, 2 * j + 1);
      const double c = at(2 * i + 1, 2 * j), d = at(2 * i + 1, 2 * j + 1);
      const std::size_t k = static_cast<std::size_t>(i) * ow + j;
      // Separable (x0 + x1)/sqrt2, (x0 - x1)/sqrt2 along columns then rows.
      out.approx.data[k] = 0.5 * ((a + b) + (c + d));
      out.horizontal.data[k] = 0.5 * ((a + b) - (c + d));
      out.vertical.data[k] = 0.5 * ((a - b) + (c - d));
      out.diagonal.data[k] = 0.5 * ((a - b) - (c - d));
    }
  }
  return out;
}

std::vector<std::uint8_t> lbp_codes(const GrayImage& img, int radius) {
  if (radius < 1) fail(ErrorKind::argument, "lbp: radius must be positive");
  if (img.width <= 2 * radius || img.height <= 2 * radius) {
    fail(ErrorKind::argument, "lbp: image smaller than sampling circle");
  }
  constexpr int points = 8;
  struct Sample {
    int r0, r1, c0, c1;
    double wr, wc;
  };
  std::array<Sample, points> samples{};
  for (int k = 0; k < points; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / points;
    // Offsets rounded to 5 decimals so axis-aligned samples land exactly on the grid.
    const double dr = std::round(-radius * std::sin(angle) * 1e5) / 1e5;
    const double dc = std::round(radius * std::cos(angle) * 1e5) / 1e5;
    const int r0 = static_cast<int>(std::floor(dr)), r1 = static_cast<int>(std::ceil(dr));
    const int c0 = static_cast<int>(std::floor(dc)), c1 = static_cast<int>(std::ceil(dc));
    samples[k] = {r0, r1, c0, c1, dr - r0, dc - c0};
  }

  const int rows = img.height - 2 * radius;
  const int cols = img.width - 2 * radius;
  std::vector<std::uint8_t> codes(static_cast<std::size_t>(rows) * cols);
  for (int r = radius; r < img.height - radius; ++r) {
    for (int c = radius; c < img.width - radius; ++c) {
      const double center = img.at(r, c);
      unsigned code = 0;
      for (int k = 0; k < points; ++k) {
        const Sample& s = samples[k];
        // Interpolate differences to the center so the comparison is exactly
        // invariant under a common intensity shift.
        const double tl = img.at(r + s.r0, c + s.c0) - center;
        const double tr = img.at(r + s.r0, c + s.c1) - center;
        const double bl = img.at(r + s.r1, c + s.c0) - center;
        const double br = img.at(r + s.r1, c + s.c1) - center;
        const double top = (1.0 - s.wc) * tl + s.wc * tr;
        const double bottom = (1.0 - s.wc) * bl + s.wc * br;
        if ((1.0 - s.wr) * top + s.wr * bottom >= 0.0) code |= 1u << k;
      }
      codes[static_cast<std::size_t>(r - radius) * cols + (c - radius)] =
          static_cast<std::uint8_t>(code);
    }
  }
  return codes;
}

std::array<double, 14> texture_features(const GrayImage& img) { return stats_of(img.data); }

std::vector<double> glcm_features(const GrayImage& img) {
  std::vector<double> out;
  out.reserve(group_width(FeatureGroup::glcm));
  for (GlcmDirection dir : kGlcmDirections) append(out, stats_of(glcm_matrix(img, dir).counts));
  return out;
}

std::vector<double> gldm_features(const GrayImage& img) {
  std::vector<double> out;
  out.reserve(group_width(FeatureGroup::gldm));
  for (GldmDirection dir : kGldmDirections) append(out, stats_of(gldm_histogram(img, dir)));
  return out;
}

std::array<double, 14> fft_features(const GrayImage& img) {
  auto mag = fft_magnitude(img);
  for (double& v : mag) v = std::floor(v);
  return compute_stats(mag).to_array();
}

std::vector<double> wavelet_features(const GrayImage& img) {
  std::vector<double> out;
  out.reserve(group_width(FeatureGroup::wavelet));
  const Dwt2Level level1 = haar_dwt2(to_subband(img));
  const Dwt2Level level2 = haar_dwt2(level1.approx);
  for (const Dwt2Level* level : {&level1, &level2}) {
    for (const Subband* s : {&level->approx, &level->horizontal, &level->vertical, &level->diagonal}) {
      append(out, compute_stats(s->data).to_array());
    }
  }
  return out;
}

std::vector<double> lbp_features(const GrayImage& img) {
  std::vector<double> out;
  out.reserve(group_width(FeatureGroup::lbp));
  for (int radius : kLbpRadii) append(out, stats_of(lbp_codes(img, radius)));
  return out;
}

std::vector<double> group_features(const GrayImage& img, FeatureGroup group) {
  switch (group) {
    case FeatureGroup::texture: {
      const auto a = texture_features(img);
      return {a.begin(), a.end()};
    }
    case FeatureGroup::glcm: return glcm_features(img);
    case FeatureGroup::gldm: return gldm_features(img);
    case FeatureGroup::fft: {
      const auto a = fft_features(img);
      return {a.begin(), a.end()};
    }
    case FeatureGroup::wavelet: return wavelet_features(img);
    case FeatureGroup::lbp: return lbp_features(img);
  }
  return {};
}

std::vector<double> extract_groups(const GrayImage& img, std::span<const FeatureGroup> groups) {
  std::vector<double> out;
  const auto ordered = canonical_groups(groups);
  out.reserve(groups_width(ordered));
  for (FeatureGroup g : ordered) {
    const auto block = group_features(img, g);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

std::vector<double> extract_handcrafted(const GrayImage& img) { return extract_groups(img, kAllGroups); }

}  // namespace radfuse
