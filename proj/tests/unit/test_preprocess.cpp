#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <doctest.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "oracles.hpp"
#include "radfuse/common.hpp"
#include "radfuse/preprocess.hpp"
#include "test_util.hpp"

using namespace radfuse;

namespace {

cv::Mat to_mat(const GrayImage& img) {
  return cv::Mat(img.height, img.width, CV_8U, const_cast<std::uint8_t*>(img.data.data())).clone();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::internal;
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("load 1x1 png") {
    testutil::TempDir dir("pre");
    const auto path = dir / "one.png";
    cv::imwrite(path.string(), cv::Mat(1, 1, CV_8U, cv::Scalar(255)));
    const RawImage img = load_image(path);
    CHECK(img.width == 1);
    CHECK(img.height == 1);
    CHECK(img.channels == 1);
    CHECK(img.at(0, 0) == 255);
  }

  TEST_CASE("load 3-channel jpeg keeps shape, RGB order") {
    testutil::TempDir dir("pre");
    const auto path = dir / "color.jpg";
    cv::Mat bgr(512, 512, CV_8UC3, cv::Scalar(10, 20, 200));
    cv::imwrite(path.string(), bgr, {cv::IMWRITE_JPEG_QUALITY, 100});
    const RawImage img = load_image(path);
    CHECK(img.width == 512);
    CHECK(img.height == 512);
    CHECK(img.channels == 3);
    CHECK(img.data.size() == 512u * 512u * 3u);
    CHECK(std::abs(img.at(100, 100, 0) - 200) <= 3);
    CHECK(std::abs(img.at(100, 100, 2) - 10) <= 3);
  }

  TEST_CASE("alpha channel dropped") {
    testutil::TempDir dir("pre");
    const auto path = dir / "rgba.png";
    cv::imwrite(path.string(), cv::Mat(4, 5, CV_8UC4, cv::Scalar(1, 2, 3, 128)));
    const RawImage img = load_image(path);
    CHECK(img.channels == 3);
    CHECK(img.at(0, 0, 0) == 3);
    CHECK(img.at(0, 0, 2) == 1);
  }

  TEST_CASE("16-bit png reduced to 8 bits") {
    testutil::TempDir dir("pre");
    const auto path = dir / "deep.png";
    cv::imwrite(path.string(), cv::Mat(3, 3, CV_16U, cv::Scalar(65535)));
    const RawImage img = load_image(path);
    CHECK(img.channels == 1);
    CHECK(img.at(1, 1) == 255);
  }

  TEST_CASE("unreadable inputs are decode errors") {
    testutil::TempDir dir("pre");
    CHECK(kind_of([&] { load_image(dir / "missing.png"); }) == ErrorKind::decode);

    const auto text = dir / "notes.png";
    std::ofstream(text) << "plain text, not an image";
    CHECK(kind_of([&] { load_image(text); }) == ErrorKind::decode);

    std::vector<std::uint8_t> png;
    cv::Mat noise(64, 64, CV_8U);
    cv::randu(noise, 0, 255);
    cv::imencode(".png", noise, png);
    const auto cut = dir / "cut.png";
    std::ofstream(cut, std::ios::binary).write(reinterpret_cast<const char*>(png.data()), png.size() / 2);
    CHECK(kind_of([&] { load_image(cut); }) == ErrorKind::decode);

    std::vector<std::uint8_t> jpg;
    cv::imencode(".jpg", noise, jpg);
    const auto cutj = dir / "cut.jpg";
    std::ofstream(cutj, std::ios::binary).write(reinterpret_cast<const char*>(jpg.data()), jpg.size() / 2);
    CHECK(kind_of([&] { load_image(cutj); }) == ErrorKind::decode);
  }

  TEST_CASE("grayscale luma") {
    auto pixel = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
      RawImage img{1, 1, 3, {r, g, b}};
      return to_grayscale(img).at(0, 0);
    };
    CHECK(pixel(255, 255, 255) == 255);
    CHECK(pixel(0, 0, 0) == 0);
    CHECK(pixel(255, 0, 0) == 76);
    CHECK(pixel(0, 255, 0) == 150);
    CHECK(pixel(0, 0, 255) == 29);
    RawImage gray{2, 1, 1, {7, 9}};
    CHECK(to_grayscale(gray).data == std::vector<std::uint8_t>{7, 9});
  }

  TEST_CASE("resize: constant, identity, hand-evaluated upscale") {
    GrayImage constant(37, 91, 100);
    const auto up = resize_bilinear(constant);
    CHECK(up.width == 224);
    CHECK(up.height == 224);
    CHECK(std::all_of(up.data.begin(), up.data.end(), [](auto v) { return v == 100; }));

    std::mt19937_64 rng(3);
    const GrayImage same = testutil::random_image(224, 224, 256, rng);
    CHECK(resize_bilinear(same) == same);

    GrayImage two(2, 2);
    two.at(0, 1) = 255;
    two.at(1, 1) = 255;
    const auto four = resize_bilinear(two, 4, 4);
    const std::vector<std::uint8_t> row{0, 64, 191, 255};
    for (int r = 0; r < 4; ++r) {
      CHECK(std::vector<std::uint8_t>(four.data.begin() + r * 4, four.data.begin() + r * 4 + 4) == row);
    }
    CHECK_THROWS_AS(resize_bilinear(GrayImage{}), Error);
  }

  TEST_CASE("resize agrees with OpenCV bilinear within 1") {
    std::mt19937_64 rng(8);
    for (auto [w, h] : {std::pair{300, 280}, {100, 150}, {513, 97}}) {
      const GrayImage src = testutil::random_image(w, h, 256, rng);
      const auto ours = resize_bilinear(src);
      cv::Mat ref;
      cv::resize(to_mat(src), ref, cv::Size(224, 224), 0, 0, cv::INTER_LINEAR);
      int worst = 0;
      for (int r = 0; r < 224; ++r) {
        for (int c = 0; c < 224; ++c) worst = std::max(worst, std::abs(ours.at(r, c) - ref.at<std::uint8_t>(r, c)));
      }
      CHECK(worst <= 1);
    }
  }

  TEST_CASE("clahe: constant image stays constant") {
    for (int v : {0, 77, 255}) {
      const auto out = clahe(GrayImage(224, 224, static_cast<std::uint8_t>(v)));
      CHECK(std::all_of(out.data.begin(), out.data.end(), [&](auto x) { return x == out.data[0]; }));
    }
  }

  TEST_CASE("clahe: low-contrast ramp gains support") {
    GrayImage ramp(224, 224);
    for (int r = 0; r < 224; ++r) {
      for (int c = 0; c < 224; ++c) ramp.at(r, c) = static_cast<std::uint8_t>(100 + c * 20 / 224);
    }
    const auto out = clahe(ramp);
    const auto [lo, hi] = std::minmax_element(out.data.begin(), out.data.end());
    CHECK(*hi - *lo > 20);
  }

  TEST_CASE("clahe: one tile, no clipping = global equalization") {
    std::mt19937_64 rng(21);
    ClaheConfig cfg;
    cfg.tiles_x = cfg.tiles_y = 1;
    cfg.clip_limit = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 5; ++trial) {
      GrayImage img = testutil::random_image(224, 224, 40 + trial * 30, rng);
      for (auto& v : img.data) v = static_cast<std::uint8_t>(v / 3 + 50);
      CHECK(clahe(img, cfg) == oracle::global_equalize(img));
    }
  }

  TEST_CASE("clahe: deterministic, in range, config validation") {
    std::mt19937_64 rng(2);
    const GrayImage img = testutil::random_image(224, 224, 256, rng);
    CHECK(clahe(img) == clahe(img));
    ClaheConfig odd;
    odd.tiles_x = 5;
    odd.tiles_y = 3;
    const auto out = clahe(img, odd);
    CHECK(out.width == 224);
    CHECK(out.height == 224);
    ClaheConfig bad;
    bad.clip_limit = 0.0;
    CHECK_THROWS_AS(clahe(img, bad), Error);
    bad = {};
    bad.tiles_x = 0;
    CHECK_THROWS_AS(clahe(img, bad), Error);
  }

  TEST_CASE("model input centering") {
    GrayImage img(224, 224, 0);
    img.at(0, 1) = 255;
    img.at(0, 2) = 117;
    const auto t = to_model_input(img);
    CHECK(t.width == 224);
    CHECK(t.data.size() == 224u * 224u * 3u);
    CHECK(t.at(0, 0, 0) == doctest::Approx(-103.939f));
    CHECK(t.at(0, 0, 1) == doctest::Approx(-116.779f));
    CHECK(t.at(0, 0, 2) == doctest::Approx(-123.68f));
    CHECK(t.at(0, 1, 0) == doctest::Approx(151.061f));
    CHECK(t.at(0, 1, 1) == doctest::Approx(138.221f));
    CHECK(t.at(0, 1, 2) == doctest::Approx(131.32f));
    const auto z = to_model_input(img, {117, 117, 117});
    CHECK(z.at(0, 2, 1) == 0.0f);
    for (int r = 0; r < 224; r += 37) {
      for (int c = 0; c < 224; c += 41) {
        CHECK(t.at(r, c, 2) - t.at(r, c, 0) == doctest::Approx(103.939 - 123.68).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("preprocess_image shape and determinism") {
    testutil::TempDir dir("pre");
    const auto path = dir / "x.png";
    cv::Mat noise(300, 260, CV_8UC3);
    cv::randu(noise, 0, 255);
    cv::imwrite(path.string(), noise);
    const auto a = preprocess_image(path);
    const auto b = preprocess_image(path);
    CHECK(a.gray.width == 224);
    CHECK(a.gray.height == 224);
    CHECK(a.tensor.width == 224);
    CHECK(a.tensor.height == 224);
    CHECK(a.gray == b.gray);
    CHECK(a.tensor == b.tensor);
    const auto bad = dir / "bad.png";
    std::ofstream(bad) << "junk";
    CHECK_THROWS_AS(preprocess_image(bad), Error);
  }
}
