#include "synthetic.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "radfuse/parallel.hpp"
#include "radfuse/preprocess.hpp"
#include "radfuse/rff.hpp"

namespace radfuse::synth {
namespace {

constexpr int kPoolGrid = 64;
constexpr int kFilters = 16;
constexpr int kTap = 5;
constexpr int kPool = 4;

GrayImage from_mat(const cv::Mat& m) {
  cv::Mat u8;
  m.convertTo(u8, CV_8U);
  GrayImage out(u8.cols, u8.rows);
  for (int r = 0; r < u8.rows; ++r) {
    std::memcpy(&out.data[static_cast<std::size_t>(r) * u8.cols], u8.ptr<std::uint8_t>(r), u8.cols);
  }
  return out;
}

cv::Mat smoothed_noise(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> sigma(2.5, 6.0);
  cv::Mat noise(size, size, CV_64F);
  cv::randn(noise, 0.0, 1.0);
  cv::Mat out;
  cv::GaussianBlur(noise, out, cv::Size(0, 0), sigma(rng));
  cv::normalize(out, out, -1.0, 1.0, cv::NORM_MINMAX);
  return out;
}

cv::Mat stripes(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> period(8.0, 20.0);
  std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
  const double a = angle(rng), p = period(rng), ph = phase(rng);
  const double cx = std::cos(a), sy = std::sin(a);
  cv::Mat out(size, size, CV_64F);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      out.at<double>(r, c) = std::sin(2 * std::numbers::pi * (c * cx + r * sy) / p + ph);
    }
  }
  return out;
}

cv::Mat blobs(std::mt19937_64& rng, int size) {
  std::uniform_int_distribution<int> count(6, 14);
  std::uniform_real_distribution<double> pos(0.0, size);
  std::uniform_real_distribution<double> radius(size / 24.0, size / 9.0);
  cv::Mat out(size, size, CV_64F, cv::Scalar(0.0));
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double x = pos(rng), y = pos(rng), s = radius(rng);
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const double d2 = (c - x) * (c - x) + (r - y) * (r - y);
        out.at<double>(r, c) += std::exp(-d2 / (2 * s * s));
      }
    }
  }
  cv::normalize(out, out, -1.0, 1.0, cv::NORM_MINMAX);
  return out;
}

}  // namespace

GrayImage texture_image(ClassLabel label, std::uint64_t seed, int size) {
  std::mt19937_64 rng(seed * 3 + static_cast<std::uint64_t>(class_index(label)));
  cv::Mat pattern;
  switch (label) {
    case ClassLabel::covid: pattern = smoothed_noise(rng, size); break;
    case ClassLabel::normal: pattern = stripes(rng, size); break;
    case ClassLabel::pneumonia: pattern = blobs(rng, size); break;
  }
  std::uniform_real_distribution<double> contrast(35.0, 70.0);
  std::uniform_real_distribution<double> brightness(90.0, 160.0);
  std::uniform_real_distribution<double> noise_sd(3.0, 9.0);
  cv::Mat noise(size, size, CV_64F);
  cv::randn(noise, 0.0, noise_sd(rng));
  cv::Mat img = pattern * contrast(rng) + brightness(rng) + noise;
  return from_mat(img);
}

void write_png(const GrayImage& img, const std::filesystem::path& path) {
  const cv::Mat m(img.height, img.width, CV_8U, const_cast<std::uint8_t*>(img.data.data()));
  if (!cv::imwrite(path.string(), m)) fail(ErrorKind::data, "cannot write image: " + path.string());
}

LabeledDataset write_texture_dataset(const std::filesystem::path& root, const DatasetOptions& opts) {
  std::vector<Sample> samples;
  for (ClassLabel label : kClassOrder) {
    const auto dir = root / std::string(to_string(label));
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < opts.per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04zu.png", std::string(to_string(label)).c_str(), i);
      const auto path = dir / name;
      write_png(texture_image(label, opts.seed * 1000003 + i, opts.size), path);
      samples.push_back({std::string(to_string(label)) + "/" + name, path, label});
    }
  }
  auto ds = make_dataset(std::move(samples));
  write_manifest(ds, root / "manifest.csv");
  return ds;
}

RandomConvFeatures::RandomConvFeatures(std::uint64_t seed) : filters_(kFilters * kTap * kTap) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> w(0.0f, 1.0f / kTap);
  for (auto& v : filters_) v = w(rng);
}

std::vector<float> RandomConvFeatures::operator()(const GrayImage& img) const {
  const GrayImage small = resize_bilinear(img, kPoolGrid, kPoolGrid);
  std::vector<float> x(small.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = small.data[i] / 255.0f - 0.5f;

  const int cells = kPoolGrid / kPool;
  std::vector<float> out(static_cast<std::size_t>(kFilters) * cells * cells, 0.0f);
  const int half = kTap / 2;
  for (int f = 0; f < kFilters; ++f) {
    const float* k = &filters_[static_cast<std::size_t>(f) * kTap * kTap];
    for (int r = 0; r < kPoolGrid; ++r) {
      for (int c = 0; c < kPoolGrid; ++c) {
        float acc = 0.0f;
        for (int dr = -half; dr <= half; ++dr) {
          const int rr = std::clamp(r + dr, 0, kPoolGrid - 1);
          for (int dc = -half; dc <= half; ++dc) {
            const int cc = std::clamp(c + dc, 0, kPoolGrid - 1);
            acc += k[(dr + half) * kTap + dc + half] * x[static_cast<std::size_t>(rr) * kPoolGrid + cc];
          }
        }
        out[(static_cast<std::size_t>(f) * cells + r / kPool) * cells + c / kPool] +=
            std::max(acc, 0.0f) / (kPool * kPool);
      }
    }
  }
  return out;
}

void write_standin_deep_features(const LabeledDataset& ds, const std::filesystem::path& path,
                                 std::uint64_t seed, int jobs) {
  const RandomConvFeatures conv(seed);
  std::vector<float> values(ds.size() * kStandinDeepWidth);
  parallel_for(ds.size(), jobs, [&](std::size_t i) {
    const auto row = conv(to_grayscale(load_image(ds.samples[i].path)));
    std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(i * kStandinDeepWidth));
  });
  RffHeader header;
  header.n_samples = ds.size();
  header.n_features = kStandinDeepWidth;
  header.dtype = RffDtype::f32;
  for (const auto& s : ds.samples) header.ids.push_back(s.id);
  header.extractor = "random-conv-standin:" + std::to_string(seed);
  header.group_layout = {{"deep", 0, kStandinDeepWidth}};
  write_rff(path, header, std::span<const float>(values));
}

}  // namespace radfuse::synth
