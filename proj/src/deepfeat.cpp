#include "radfuse/deepfeat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "radfuse/common.hpp"
#include "radfuse/parallel.hpp"

#ifdef RADFUSE_HAVE_ONNXRUNTIME
#include <onnxruntime_cxx_api.h>
#endif

namespace radfuse {

// --- Providers -----------------------------------------------------------------

PrecomputedProvider::PrecomputedProvider(const std::filesystem::path& path,
                                         std::optional<std::size_t> expected_width)
    : path_(path), file_(read_rff(path)) {
  if (expected_width && *expected_width != file_.cols()) {
    fail(ErrorKind::provider, "feature file " + path.string() + " has width " +
                                  std::to_string(file_.cols()) + ", expected " +
                                  std::to_string(*expected_width));
  }
  const auto& ids = file_.header().ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index_.emplace(ids[i], i).second) {
      fail(ErrorKind::format, "duplicate id '" + ids[i] + "' in " + path.string());
    }
  }
}

std::vector<float> PrecomputedProvider::features(const DeepSample& sample) const {
  const auto it = index_.find(sample.id);
  if (it == index_.end()) {
    fail(ErrorKind::lookup, "id '" + sample.id + "' not present in " + path_.string());
  }
  return file_.row_f32(it->second);
}

std::string PrecomputedProvider::describe() const { return "precomputed:" + path_.string(); }

std::filesystem::path onnx_metadata_path(const std::filesystem::path& model_path) {
  auto p = model_path;
  p.replace_extension(".json");
  return p;
}

OnnxModelMetadata parse_onnx_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::provider, "missing ONNX metadata file: " + path.string());
  OnnxModelMetadata m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.backbone = j.value("backbone", "");
    m.input_name = j.value("input_name", "input");
    const auto layout = j.at("layout").get<std::string>();
    if (layout == "NCHW") {
      m.layout = TensorLayout::nchw;
    } else if (layout == "NHWC") {
      m.layout = TensorLayout::nhwc;
    } else {
      fail(ErrorKind::provider, "unknown tensor layout '" + layout + "' in " + path.string());
    }
    m.output_width = j.at("output_width").get<std::size_t>();
    m.channel_order = j.value("channel_order", "BGR");
    if (m.channel_order != "BGR") {
      fail(ErrorKind::provider, "unsupported channel order '" + m.channel_order + "'");
    }
    m.means_bgr = j.at("means_bgr").get<std::array<double, 3>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::provider, "malformed ONNX metadata " + path.string() + ": " + e.what());
  }
  return m;
}

#ifdef RADFUSE_HAVE_ONNXRUNTIME
namespace {

class OnnxProvider final : public DeepFeatureProvider {
public:
  OnnxProvider(const std::filesystem::path& model_path, std::size_t expected_width)
      : path_(model_path),
        meta_(parse_onnx_metadata(onnx_metadata_path(model_path))),
        env_(ORT_LOGGING_LEVEL_WARNING, "radfuse"),
        session_(nullptr) {
    if (meta_.output_width != expected_width) {
      fail(ErrorKind::provider, "ONNX model declares width " + std::to_string(meta_.output_width) +
                                    ", expected " + std::to_string(expected_width));
    }
    Ort::SessionOptions opts;
    opts.SetIntraOpNumThreads(1);
    session_ = Ort::Session(env_, model_path.c_str(), opts);
    Ort::AllocatorWithDefaultOptions alloc;
    output_name_ = session_.GetOutputNameAllocated(0, alloc).get();
  }

  std::size_t width() const override { return meta_.output_width; }

  std::vector<float> features(const DeepSample& sample) const override {
    if (sample.tensor == nullptr) {
      fail(ErrorKind::provider, "ONNX backend needs the image tensor for '" + sample.id + "'");
    }
    const CenteredRgbTensor& t = *sample.tensor;
    std::vector<float> input(t.data.size());
    std::array<std::int64_t, 4> shape{};
    if (meta_.layout == TensorLayout::nhwc) {
      input = t.data;
      shape = {1, t.height, t.width, 3};
    } else {
      const std::size_t plane = static_cast<std::size_t>(t.width) * t.height;
      for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) input[c * plane + i] = t.data[3 * i + c];
      shape = {1, 3, t.height, t.width};
    }
    auto mem = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
    Ort::Value in = Ort::Value::CreateTensor<float>(mem, input.data(), input.size(), shape.data(),
                                                    shape.size());
    const char* in_names[] = {meta_.input_name.c_str()};
    const char* out_names[] = {output_name_.c_str()};
    auto outs = session_.Run(Ort::RunOptions{nullptr}, in_names, &in, 1, out_names, 1);
    const std::size_t count = outs[0].GetTensorTypeAndShapeInfo().GetElementCount();
    if (count != meta_.output_width) {
      fail(ErrorKind::provider, "ONNX output has " + std::to_string(count) + " values, expected " +
                                    std::to_string(meta_.output_width));
    }
    const float* p = outs[0].GetTensorData<float>();
    return {p, p + count};
  }

  std::string describe() const override { return "onnx:" + path_.string(); }

private:
  std::filesystem::path path_;
  OnnxModelMetadata meta_;
  Ort::Env env_;
  mutable Ort::Session session_;
  std::string output_name_;
};

}  // namespace

bool onnx_runtime_available() noexcept { return true; }

std::unique_ptr<DeepFeatureProvider> make_onnx_provider(const std::filesystem::path& model_path,
                                                        std::size_t expected_width) {
  try {
    return std::make_unique<OnnxProvider>(model_path, expected_width);
  } catch (const Ort::Exception& e) {
    fail(ErrorKind::provider, std::string("ONNX Runtime: ") + e.what());
  }
}
#else
bool onnx_runtime_available() noexcept { return false; }

std::unique_ptr<DeepFeatureProvider> make_onnx_provider(const std::filesystem::path& model_path,
                                                        std::size_t) {
  fail(ErrorKind::provider, "this build has no ONNX Runtime support; cannot load " +
                                model_path.string() + " (use precomputed feature files)");
}
#endif

DeepFeatureMatrix deep_features(const DeepFeatureProvider& provider,
                                std::span<const DeepSample> samples, int jobs) {
  DeepFeatureMatrix out;
  const std::size_t w = provider.width();
  out.values.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(w));
  out.ids.reserve(samples.size());
  for (const auto& s : samples) out.ids.push_back(s.id);

  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    std::vector<float> row;
    try {
      row = provider.features(samples[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), "sample '" + samples[i].id + "': " + e.what());
    }
    if (row.size() != w) {
      fail(ErrorKind::provider, "sample '" + samples[i].id + "': provider returned " +
                                    std::to_string(row.size()) + " values, expected " +
                                    std::to_string(w));
    }
    for (float v : row) {
      if (!std::isfinite(v)) fail(ErrorKind::provider, "sample '" + samples[i].id + "': non-finite deep feature");
    }
    out.values.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXf>(row.data(), static_cast<Eigen::Index>(w));
  });
  return out;
}

// --- Kernel PCA ------------------------------------------------------------------

namespace {

constexpr Eigen::Index kColumnBlock = 512;

template <typename Matrix>
Eigen::MatrixXd gram(const Matrix& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j0 = 0; j0 < X.cols(); j0 += kColumnBlock) {
    const Eigen::Index len = std::min(kColumnBlock, X.cols() - j0);
    const Eigen::MatrixXd B = X.middleCols(j0, len).template cast<double>();
    G.selfadjointView<Eigen::Lower>().rankUpdate(B);
  }
  return G.selfadjointView<Eigen::Lower>();
}

template <typename Matrix>
Eigen::MatrixXd cross_gram(const Matrix& A, const RowMatrix& B) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(A.rows(), B.rows());
  for (Eigen::Index j0 = 0; j0 < A.cols(); j0 += kColumnBlock) {
    const Eigen::Index len = std::min(kColumnBlock, A.cols() - j0);
    const Eigen::MatrixXd a = A.middleCols(j0, len).template cast<double>();
    const Eigen::MatrixXd b = B.middleCols(j0, len).template cast<double>();
    G.noalias() += a * b.transpose();
  }
  return G;
}

template <typename Matrix>
Eigen::VectorXd row_sq_norms(const Matrix& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = X.row(i).template cast<double>().squaredNorm();
  return out;
}

void rbf_from_gram(Eigen::MatrixXd& K, const Eigen::VectorXd& left_norms,
                   const Eigen::VectorXd& right_norms, double gamma) {
  for (Eigen::Index j = 0; j < K.cols(); ++j) {
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      const double d2 = std::max(0.0, left_norms[i] + right_norms[j] - 2.0 * K(i, j));
      K(i, j) = std::exp(-gamma * d2);
    }
  }
}

template <typename Matrix>
KpcaFit fit_impl(const Matrix& X, int k, const KernelSpec& kernel) {
  if (k <= 0) fail(ErrorKind::argument, "kpca_fit: number of components must be positive");
  const Eigen::Index n = X.rows();
  if (n < 2) fail(ErrorKind::argument, "kpca_fit: need at least 2 samples");
  if (X.cols() < 1) fail(ErrorKind::argument, "kpca_fit: empty feature width");
  if (kernel.kind == KernelKind::rbf && kernel.gamma < 0) {
    fail(ErrorKind::argument, "kpca_fit: rbf gamma must be non-negative");
  }

  KpcaFit fit;
  KpcaModel& model = fit.model;
  model.kernel = kernel;
  model.input_width = static_cast<std::size_t>(X.cols());
  fit.requested = static_cast<std::size_t>(k);

  Eigen::MatrixXd K = gram(X);
  if (kernel.kind == KernelKind::rbf) {
    const Eigen::VectorXd norms = row_sq_norms(X);
    rbf_from_gram(K, norms, norms, model.effective_gamma());
  }

  // Double centering: K - 1K/n - K1/n + 1K1/n^2.
  const Eigen::VectorXd col_means = K.colwise().mean().transpose();
  const double grand = col_means.mean();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) K(i, j) += grand - col_means[i] - col_means[j];
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
  if (eig.info() != Eigen::Success) fail(ErrorKind::internal, "kpca_fit: eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double lambda_max = values[n - 1];
  if (!(lambda_max > 0.0)) fail(ErrorKind::degenerate, "kpca_fit: centered kernel matrix is zero");

  const double threshold = kEigenvalueTolerance * lambda_max;
  const Eigen::Index limit = std::min<Eigen::Index>(k, n - 1);
  Eigen::Index kept = 0;
  while (kept < limit && values[n - 1 - kept] > threshold) ++kept;
  if (kept == 0) fail(ErrorKind::degenerate, "kpca_fit: all eigenvalues below tolerance");
  fit.clamped = kept < k;

  model.eigenvalues.resize(kept);
  Eigen::MatrixXd vectors(n, kept);
  for (Eigen::Index j = 0; j < kept; ++j) {
    model.eigenvalues[j] = values[n - 1 - j];
    Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - j);
    // Deterministic sign: the largest-magnitude entry is positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    vectors.col(j) = v;
  }

  const Eigen::VectorXd sqrt_lambda = model.eigenvalues.cwiseSqrt();
  fit.scores = vectors * sqrt_lambda.asDiagonal();
  const Eigen::MatrixXd coefficients = vectors * sqrt_lambda.cwiseInverse().asDiagonal();

  if (kernel.kind == KernelKind::linear) {
    // Equivalent explicit map: score = (x - mean) . sum_i coef_i (x_i - mean)
    model.mean = Eigen::VectorXd::Zero(X.cols());
    for (Eigen::Index i = 0; i < n; ++i) model.mean += X.row(i).template cast<double>().transpose();
    model.mean /= static_cast<double>(n);
    model.projection.resize(X.cols(), kept);
    for (Eigen::Index j0 = 0; j0 < X.cols(); j0 += kColumnBlock) {
      const Eigen::Index len = std::min(kColumnBlock, X.cols() - j0);
      Eigen::MatrixXd B = X.middleCols(j0, len).template cast<double>();
      B.rowwise() -= model.mean.segment(j0, len).transpose();
      model.projection.middleRows(j0, len).noalias() = B.transpose() * coefficients;
    }
  } else {
    model.references = X.template cast<double>();
    model.kernel_col_means = col_means;
    model.kernel_grand_mean = grand;
    model.coefficients = coefficients;
  }
  return fit;
}

template <typename Matrix>
RowMatrix transform_impl(const KpcaModel& model, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != model.input_width) {
    fail(ErrorKind::argument, "kpca_transform: width " + std::to_string(X.cols()) +
                                  " does not match fitted width " + std::to_string(model.input_width));
  }
  const Eigen::Index k = static_cast<Eigen::Index>(model.components());
  RowMatrix out = RowMatrix::Zero(X.rows(), k);
  if (model.kernel.kind == KernelKind::linear) {
    for (Eigen::Index j0 = 0; j0 < X.cols(); j0 += kColumnBlock) {
      const Eigen::Index len = std::min(kColumnBlock, X.cols() - j0);
      Eigen::MatrixXd B = X.middleCols(j0, len).template cast<double>();
      B.rowwise() -= model.mean.segment(j0, len).transpose();
      out.noalias() += B * model.projection.middleRows(j0, len);
    }
    return out;
  }
  Eigen::MatrixXd K = cross_gram(X, model.references);
  rbf_from_gram(K, row_sq_norms(X), row_sq_norms(model.references), model.effective_gamma());
  const Eigen::VectorXd row_means = K.rowwise().mean();
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    K.row(i).array() += model.kernel_grand_mean - row_means[i];
    K.row(i) -= model.kernel_col_means.transpose();
  }
  out = K * model.coefficients;
  return out;
}

}  // namespace

double KpcaModel::effective_gamma() const noexcept {
  if (kernel.gamma > 0) return kernel.gamma;
  return input_width > 0 ? 1.0 / static_cast<double>(input_width) : 1.0;
}

KpcaFit kpca_fit(const FloatRowMatrix& X, int k, const KernelSpec& kernel) { return fit_impl(X, k, kernel); }
KpcaFit kpca_fit(const RowMatrix& X, int k, const KernelSpec& kernel) { return fit_impl(X, k, kernel); }

RowMatrix kpca_transform(const KpcaModel& model, const FloatRowMatrix& X) { return transform_impl(model, X); }
RowMatrix kpca_transform(const KpcaModel& model, const RowMatrix& X) { return transform_impl(model, X); }

}  // namespace radfuse
