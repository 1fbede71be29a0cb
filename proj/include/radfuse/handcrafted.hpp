#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "radfuse/image.hpp"
#include "radfuse/stats.hpp"

namespace radfuse {

enum class FeatureGroup : std::uint8_t { texture, glcm, gldm, fft, wavelet, lbp };

inline constexpr std::array<FeatureGroup, 6> kAllGroups{
    FeatureGroup::texture, FeatureGroup::glcm,    FeatureGroup::gldm,
    FeatureGroup::fft,     FeatureGroup::wavelet, FeatureGroup::lbp};

std::string_view to_string(FeatureGroup group) noexcept;
FeatureGroup parse_group(std::string_view name);  // throws Error(config)

/// Number of features a group contributes: 14, 56, 56, 14, 112, 56.
std::size_t group_width(FeatureGroup group) noexcept;

inline constexpr std::size_t kHandcraftedWidth = 308;

/// Canonicalizes a group selection to the fixed layout order, removing duplicates.
std::vector<FeatureGroup> canonical_groups(std::span<const FeatureGroup> groups);
std::size_t groups_width(std::span<const FeatureGroup> groups) noexcept;

// --- GLCM ------------------------------------------------------------------

/// Offset-1 displacement directions: 0 -> (0,+1), pi/4 -> (-1,+1), pi/2 -> (-1,0), 3pi/4 -> (-1,-1).
enum class GlcmDirection : std::uint8_t { deg0, deg45, deg90, deg135 };
inline constexpr std::array<GlcmDirection, 4> kGlcmDirections{
    GlcmDirection::deg0, GlcmDirection::deg45, GlcmDirection::deg90, GlcmDirection::deg135};

/// 256 x 256 unsymmetrized, unnormalized co-occurrence counts.
struct GlcmMatrix {
  static constexpr int levels = 256;
  std::vector<std::uint32_t> counts = std::vector<std::uint32_t>(levels * levels, 0);

  std::uint32_t at(int a, int b) const { return counts[static_cast<std::size_t>(a) * levels + b]; }
  std::uint64_t total() const;
};

GlcmMatrix glcm_matrix(const GrayImage& img, GlcmDirection dir);

// --- GLDM ------------------------------------------------------------------

/// Distance-10 displacements: 0 -> (0,+10), pi/2 -> (-10,0), pi -> (0,-10), 3pi/2 -> (+10,0).
enum class GldmDirection : std::uint8_t { deg0, deg90, deg180, deg270 };
inline constexpr std::array<GldmDirection, 4> kGldmDirections{
    GldmDirection::deg0, GldmDirection::deg90, GldmDirection::deg180, GldmDirection::deg270};
inline constexpr int kGldmDistance = 10;

/// Normalized histogram of |img(r,c) - img(r+dr,c+dc)| over valid pairs.
using GldmHistogram = std::array<double, 256>;

GldmHistogram gldm_histogram(const GrayImage& img, GldmDirection dir);

// --- FFT -------------------------------------------------------------------

/// |DFT2(img)|, quadrant-swapped so the zero frequency sits at (h/2, w/2). Row-major.
std::vector<double> fft_magnitude(const GrayImage& img);

// --- Haar DWT --------------------------------------------------------------

struct Subband {
  int width = 0;
  int height = 0;
  std::vector<double> data;
};

/// One level of the orthonormal 2-D Haar transform: approximation plus
/// horizontal, vertical and diagonal details. Odd sizes use symmetric extension.
struct Dwt2Level {
  Subband approx, horizontal, vertical, diagonal;
};

Dwt2Level haar_dwt2(const Subband& input);
Subband to_subband(const GrayImage& img);

// --- LBP -------------------------------------------------------------------

inline constexpr std::array<int, 4> kLbpRadii{2, 3, 5, 7};

/// 8-point circular LBP codes (bit k set when sample k >= center) for every pixel whose
/// sample circle stays inside the image, row-major over the interior region.
std::vector<std::uint8_t> lbp_codes(const GrayImage& img, int radius);

// --- Group extractors --------------------------------------------------------

std::array<double, 14> texture_features(const GrayImage& img);
std::vector<double> glcm_features(const GrayImage& img);
std::vector<double> gldm_features(const GrayImage& img);
std::array<double, 14> fft_features(const GrayImage& img);
std::vector<double> wavelet_features(const GrayImage& img);
std::vector<double> lbp_features(const GrayImage& img);

std::vector<double> group_features(const GrayImage& img, FeatureGroup group);

/// Concatenation of the selected groups in the fixed layout order.
std::vector<double> extract_groups(const GrayImage& img, std::span<const FeatureGroup> groups);

/// Full 308-wide vector: texture | glcm | gldm | fft | wavelet | lbp.
std::vector<double> extract_handcrafted(const GrayImage& img);

}  // namespace radfuse
