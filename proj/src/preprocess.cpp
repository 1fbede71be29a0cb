#include "radfuse/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "radfuse/common.hpp"

namespace radfuse {
namespace {

std::uint8_t clamp_round(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::decode, "cannot open image file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<unsigned char>& b) {
  static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return b.size() >= 8 && std::equal(sig, sig + 8, b.begin());
}

bool is_jpeg(const std::vector<unsigned char>& b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

// libjpeg only warns on a missing end-of-image marker and fills the rest with gray.
bool jpeg_has_eoi(const std::vector<unsigned char>& b) {
  const std::size_t window = std::min<std::size_t>(b.size(), 4096);
  for (std::size_t i = b.size() - window; i + 1 < b.size(); ++i) {
    if (b[i] == 0xFF && b[i + 1] == 0xD9) return true;
  }
  return false;
}

}  // namespace

void ClaheConfig::validate() const {
  if (tiles_x < 1 || tiles_y < 1) fail(ErrorKind::argument, "CLAHE tile grid must be at least 1x1");
  if (!(clip_limit > 0.0)) fail(ErrorKind::argument, "CLAHE clip limit must be positive");
}

RawImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (!is_png(bytes) && !is_jpeg(bytes)) {
    fail(ErrorKind::decode, "not a PNG or JPEG file: " + path.string());
  }
  if (is_jpeg(bytes) && !jpeg_has_eoi(bytes)) {
    fail(ErrorKind::decode, "truncated JPEG data: " + path.string());
  }
  cv::Mat mat;
  try {
    mat = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    fail(ErrorKind::decode, "cannot decode " + path.string() + ": " + e.what());
  }
  if (mat.empty()) fail(ErrorKind::decode, "cannot decode image: " + path.string());

  if (mat.depth() == CV_16U) {
    mat.convertTo(mat, CV_8U, 1.0 / 257.0);
  } else if (mat.depth() != CV_8U) {
    fail(ErrorKind::format, "unsupported sample depth in " + path.string());
  }

  RawImage out;
  out.width = mat.cols;
  out.height = mat.rows;
  const int src_channels = mat.channels();
  if (src_channels != 1 && src_channels != 3 && src_channels != 4) {
    fail(ErrorKind::format, "unsupported channel count " + std::to_string(src_channels) + " in " +
                                path.string());
  }
  out.channels = src_channels == 1 ? 1 : 3;
  out.data.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  std::size_t k = 0;
  for (int r = 0; r < mat.rows; ++r) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(r);
    for (int c = 0; c < mat.cols; ++c) {
      const std::uint8_t* px = row + static_cast<std::ptrdiff_t>(c) * src_channels;
      if (src_channels == 1) {
        out.data[k++] = px[0];
      } else {
        // OpenCV stores B,G,R(,A)
        out.data[k++] = px[2];
        out.data[k++] = px[1];
        out.data[k++] = px[0];
      }
    }
  }
  return out;
}

GrayImage to_grayscale(const RawImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    fail(ErrorKind::format, "to_grayscale expects 1 or 3 channels");
  }
  GrayImage out(img.width, img.height);
  if (img.channels == 1) {
    out.data = img.data;
    return out;
  }
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double r = img.data[3 * i];
    const double g = img.data[3 * i + 1];
    const double b = img.data[3 * i + 2];
    out.data[i] = clamp_round(0.299 * r + 0.587 * g + 0.114 * b);
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& img, int width, int height) {
  if (img.width < 1 || img.height < 1) fail(ErrorKind::argument, "resize: empty source image");
  if (width < 1 || height < 1) fail(ErrorKind::argument, "resize: empty target size");
  if (img.width == width && img.height == height) return img;

  struct Tap {
    int lo, hi;
    double w;
  };
  auto taps = [](int src, int dst) {
    std::vector<Tap> t(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src - 1));
      const int lo = static_cast<int>(std::floor(s));
      const int hi = std::min(lo + 1, src - 1);
      t[i] = {lo, hi, s - lo};
    }
    return t;
  };
  const auto xs = taps(img.width, width);
  const auto ys = taps(img.height, height);

  GrayImage out(width, height);
  for (int y = 0; y < height; ++y) {
    const Tap ty = ys[y];
    for (int x = 0; x < width; ++x) {
      const Tap tx = xs[x];
      const double top = (1.0 - tx.w) * img.at(ty.lo, tx.lo) + tx.w * img.at(ty.lo, tx.hi);
      const double bot = (1.0 - tx.w) * img.at(ty.hi, tx.lo) + tx.w * img.at(ty.hi, tx.hi);
      out.at(y, x) = clamp_round((1.0 - ty.w) * top + ty.w * bot);
    }
  }
  return out;
}

GrayImage clahe(const GrayImage& img, const ClaheConfig& cfg) {
  cfg.validate();
  constexpr int bins = ClaheConfig::bins;
  const int W = img.width;
  const int H = img.height;
  if (W < 1 || H < 1) fail(ErrorKind::argument, "clahe: empty image");

  const int tile_w = (W + cfg.tiles_x - 1) / cfg.tiles_x;
  const int tile_h = (H + cfg.tiles_y - 1) / cfg.tiles_y;
  const int ntx = (W + tile_w - 1) / tile_w;
  const int nty = (H + tile_h - 1) / tile_h;

  // One 256-entry mapping per tile.
  std::vector<std::array<double, bins>> luts(static_cast<std::size_t>(ntx) * nty);
  for (int ty = 0; ty < nty; ++ty) {
    for (int tx = 0; tx < ntx; ++tx) {
      const int x0 = tx * tile_w, x1 = std::min(W, x0 + tile_w);
      const int y0 = ty * tile_h, y1 = std::min(H, y0 + tile_h);
      const long pixels = static_cast<long>(x1 - x0) * (y1 - y0);

      std::array<long, bins> hist{};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) ++hist[img.at(y, x)];

      if (std::isfinite(cfg.clip_limit)) {
        const long clip =
            std::max(1L, static_cast<long>(cfg.clip_limit * static_cast<double>(pixels) / bins));
        long excess = 0;
        for (auto& h : hist) {
          if (h > clip) {
            excess += h - clip;
            h = clip;
          }
        }
        const long batch = excess / bins;
        long residual = excess % bins;
        for (auto& h : hist) h += batch;
        if (residual > 0) {
          const long step = std::max(1L, bins / residual);
          for (long i = 0; i < bins && residual > 0; i += step, --residual) ++hist[i];
        }
      }

      auto& lut = luts[static_cast<std::size_t>(ty) * ntx + tx];
      const double scale = 255.0 / static_cast<double>(pixels);
      long cdf = 0;
      for (int i = 0; i < bins; ++i) {
        cdf += hist[i];
        lut[i] = std::clamp(std::round(static_cast<double>(cdf) * scale), 0.0, 255.0);
      }
    }
  }

  auto neighbours = [](int pos, int tile, int ntiles) {
    const double f = (pos + 0.5) / tile - 0.5;
    const int lo = static_cast<int>(std::floor(f));
    const double w = f - lo;
    return std::tuple{std::clamp(lo, 0, ntiles - 1), std::clamp(lo + 1, 0, ntiles - 1), w};
  };

  GrayImage out(W, H);
  for (int y = 0; y < H; ++y) {
    const auto [ty1, ty2, wy] = neighbours(y, tile_h, nty);
    for (int x = 0; x < W; ++x) {
      const auto [tx1, tx2, wx] = neighbours(x, tile_w, ntx);
      const int v = img.at(y, x);
      const double a = luts[static_cast<std::size_t>(ty1) * ntx + tx1][v];
      const double b = luts[static_cast<std::size_t>(ty1) * ntx + tx2][v];
      const double c = luts[static_cast<std::size_t>(ty2) * ntx + tx1][v];
      const double d = luts[static_cast<std::size_t>(ty2) * ntx + tx2][v];
      const double top = (1.0 - wx) * a + wx * b;
      const double bot = (1.0 - wx) * c + wx * d;
      out.at(y, x) = clamp_round((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

CenteredRgbTensor to_model_input(const GrayImage& img, const std::array<double, 3>& means_bgr) {
  CenteredRgbTensor t;
  t.width = img.width;
  t.height = img.height;
  t.data.resize(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.data[i];
    for (int c = 0; c < 3; ++c) t.data[3 * i + c] = static_cast<float>(v - means_bgr[c]);
  }
  return t;
}

PreprocessedImage preprocess_raw(const RawImage& raw, const PreprocessConfig& cfg) {
  GrayImage gray = clahe(resize_bilinear(to_grayscale(raw)), cfg.clahe);
  CenteredRgbTensor tensor = to_model_input(gray, cfg.means_bgr);
  return {std::move(gray), std::move(tensor)};
}

PreprocessedImage preprocess_image(const std::filesystem::path& path,
                                   const PreprocessConfig& cfg) {
  return preprocess_raw(load_image(path), cfg);
}

}  // namespace radfuse
