#include <fstream>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "radfuse/common.hpp"
#include "radfuse/deepfeat.hpp"
#include "radfuse/rff.hpp"
#include "test_util.hpp"

using namespace radfuse;

namespace {

RowMatrix random_matrix(int n, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  RowMatrix X(n, w);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = d(rng);
  return X;
}

std::filesystem::path write_features(const testutil::TempDir& dir, std::size_t n, std::size_t w) {
  RffHeader h;
  h.n_samples = n;
  h.n_features = w;
  h.dtype = RffDtype::f32;
  for (std::size_t i = 0; i < n; ++i) h.ids.push_back("img" + std::to_string(i));
  h.extractor = "unit";
  std::vector<float> v(n * w);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) * 0.25f;
  const auto path = dir / "deep.rff";
  write_rff(path, h, std::span<const float>(v));
  return path;
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

TEST_SUITE("deepfeat") {
  TEST_CASE("precomputed provider serves rows by id") {
    testutil::TempDir dir("deep");
    const auto path = write_features(dir, 6, 10);
    const PrecomputedProvider p(path, 10);
    CHECK(p.width() == 10);
    CHECK_FALSE(p.needs_tensor());
    CHECK(p.contains("img3"));
    const auto row = p.features({"img3", nullptr});
    REQUIRE(row.size() == 10);
    CHECK(row[0] == 30 * 0.25f);
    CHECK(p.features({"img3", nullptr}) == row);
    CHECK(kind_of([&] { p.features({"nope", nullptr}); }) == ErrorKind::lookup);
    CHECK(kind_of([&] { PrecomputedProvider(path, 25088); }) == ErrorKind::provider);
  }

  TEST_CASE("batch extraction keeps order for any job count") {
    testutil::TempDir dir("deep");
    const PrecomputedProvider p(write_features(dir, 20, 8));
    std::vector<DeepSample> samples;
    for (int i : {7, 3, 19, 0, 11, 4}) samples.push_back({"img" + std::to_string(i), nullptr});
    const auto one = deep_features(p, samples, 1);
    const auto many = deep_features(p, samples, 4);
    CHECK(one.ids == many.ids);
    CHECK(one.values == many.values);
    CHECK(one.values(0, 0) == 7 * 8 * 0.25f);
    CHECK(one.values(2, 0) == 19 * 8 * 0.25f);
    samples.push_back({"ghost", nullptr});
    CHECK(kind_of([&] { deep_features(p, samples, 2); }) == ErrorKind::lookup);
  }

  TEST_CASE("onnx metadata sidecar") {
    testutil::TempDir dir("deep");
    const auto model = dir / "vgg16.onnx";
    CHECK(onnx_metadata_path(model) == dir / "vgg16.json");
    std::ofstream(dir / "vgg16.json") << R"({"backbone":"vgg16","input_name":"input","layout":"NHWC",)"
                                          R"("output_width":25088,"channel_order":"BGR",)"
                                          R"("means_bgr":[103.939,116.779,123.68]})";
    const auto meta = parse_onnx_metadata(dir / "vgg16.json");
    CHECK(meta.backbone == "vgg16");
    CHECK(meta.layout == TensorLayout::nhwc);
    CHECK(meta.output_width == kVgg16Width);
    CHECK(meta.means_bgr[2] == 123.68);
    std::ofstream(dir / "bad.json") << R"({"backbone":"x","layout":"CHWN","output_width":3})";
    CHECK(kind_of([&] { parse_onnx_metadata(dir / "bad.json"); }) == ErrorKind::provider);
    CHECK(kind_of([&] { parse_onnx_metadata(dir / "missing.json"); }) == ErrorKind::provider);
    if (!onnx_runtime_available()) {
      CHECK(kind_of([&] { make_onnx_provider(model, kVgg16Width); }) == ErrorKind::provider);
    }
  }

  TEST_CASE("kpca: rank of two points") {
    RowMatrix X(2, 5);
    X << 1, 2, 3, 4, 5, 0, 0, 1, 0, 0;
    const auto fit = kpca_fit(X, 10);
    CHECK(fit.model.components() == 1);
    CHECK(fit.clamped);
    CHECK(fit.requested == 10);
  }

  TEST_CASE("kpca linear equals PCA up to sign") {
    const RowMatrix X = random_matrix(50, 30, 3);
    const auto fit = kpca_fit(X, 10);
    REQUIRE(fit.model.components() == 10);
    const Eigen::MatrixXd ref = oracle::svd_pca_scores(X, 10);
    for (int j = 0; j < 10; ++j) {
      const double sign = fit.scores.col(j).dot(ref.col(j)) >= 0 ? 1.0 : -1.0;
      CHECK((fit.scores.col(j) - sign * ref.col(j)).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }

  TEST_CASE("kpca: rank bound, centering, orthogonality, transform consistency") {
    const RowMatrix X = random_matrix(40, 200, 5);
    const auto fit = kpca_fit(X, 1000);
    CHECK(fit.model.components() <= 39);
    CHECK(fit.clamped);
    const auto& lam = fit.model.eigenvalues;
    for (Eigen::Index j = 1; j < lam.size(); ++j) CHECK(lam(j) <= lam(j - 1));
    CHECK(fit.scores.colwise().mean().cwiseAbs().maxCoeff() <= 1e-8);
    const Eigen::MatrixXd gram = fit.scores.transpose() * fit.scores;
    const Eigen::MatrixXd diff = gram - Eigen::MatrixXd(lam.asDiagonal());
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-6 * lam(0));
    const RowMatrix again = kpca_transform(fit.model, X);
    CHECK((again - fit.scores).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("kpca full rank preserves distances") {
    const RowMatrix X = random_matrix(12, 6, 8);
    const auto fit = kpca_fit(X, 1000);
    CHECK(fit.model.components() == 6);
    const RowMatrix centered = X.rowwise() - X.colwise().mean();
    for (int i = 0; i < 12; ++i) {
      for (int j = i + 1; j < 12; ++j) {
        const double a = (fit.scores.row(i) - fit.scores.row(j)).norm();
        const double b = (centered.row(i) - centered.row(j)).norm();
        CHECK(std::abs(a - b) <= 1e-6);
      }
    }
  }

  TEST_CASE("kpca rbf: transform reproduces training scores") {
    const RowMatrix X = random_matrix(30, 12, 9);
    const auto fit = kpca_fit(X, 8, {KernelKind::rbf, 0.0});
    CHECK(fit.model.effective_gamma() == doctest::Approx(1.0 / 12));
    const RowMatrix again = kpca_transform(fit.model, X);
    CHECK((again - fit.scores).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(fit.scores.colwise().mean().cwiseAbs().maxCoeff() <= 1e-8);
    const RowMatrix fresh = random_matrix(4, 12, 10);
    CHECK(kpca_transform(fit.model, fresh).cols() == fit.scores.cols());
  }

  TEST_CASE("kpca float and double inputs agree; fit is deterministic") {
    const RowMatrix X = random_matrix(25, 40, 12);
    const FloatRowMatrix Xf = X.cast<float>();
    const auto a = kpca_fit(Xf, 5);
    const auto b = kpca_fit(RowMatrix(Xf.cast<double>()), 5);
    CHECK((a.scores - b.scores).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(kpca_fit(Xf, 5).scores == a.scores);
    CHECK((kpca_transform(a.model, Xf) - a.scores).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("kpca errors") {
    const RowMatrix X = random_matrix(5, 4, 1);
    CHECK(kind_of([&] { kpca_fit(X, 0); }) == ErrorKind::argument);
    CHECK(kind_of([&] { kpca_fit(RowMatrix(X.topRows(1)), 2); }) == ErrorKind::argument);
    RowMatrix same(4, 3);
    same.rowwise() = Eigen::RowVector3d(1, 2, 3);
    CHECK(kind_of([&] { kpca_fit(same, 2); }) == ErrorKind::degenerate);
    const auto fit = kpca_fit(X, 2);
    CHECK(kind_of([&] { kpca_transform(fit.model, RowMatrix(3, 5)); }) == ErrorKind::argument);
  }
}
