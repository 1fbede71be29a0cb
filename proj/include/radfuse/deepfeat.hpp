#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "radfuse/image.hpp"
#include "radfuse/rff.hpp"

namespace radfuse {

using FloatRowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kVgg16Width = 25088;     // 7 x 7 x 512
inline constexpr std::size_t kResNet50Width = 100352;  // 7 x 7 x 2048

/// One image as seen by a deep-feature backend.
struct DeepSample {
  std::string id;
  const CenteredRgbTensor* tensor = nullptr;
};

struct DeepFeatureMatrix {
  std::vector<std::string> ids;
  FloatRowMatrix values;
};

class DeepFeatureProvider {
public:
  virtual ~DeepFeatureProvider() = default;

  virtual std::size_t width() const = 0;
  /// Flattened feature row for one sample. Must be referentially transparent.
  virtual std::vector<float> features(const DeepSample& sample) const = 0;
  virtual std::string describe() const = 0;
  /// False when rows are looked up by id alone and images need not be decoded.
  virtual bool needs_tensor() const { return true; }
};

/// Serves rows from an RFF1 file keyed by sample id.
class PrecomputedProvider final : public DeepFeatureProvider {
public:
  explicit PrecomputedProvider(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_width = std::nullopt);

  std::size_t width() const override { return file_.cols(); }
  std::vector<float> features(const DeepSample& sample) const override;
  std::string describe() const override;
  bool needs_tensor() const override { return false; }
  bool contains(const std::string& id) const { return index_.contains(id); }

private:
  std::filesystem::path path_;
  RffFile file_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class TensorLayout { nchw, nhwc };

/// Sidecar JSON written next to an exported ONNX graph.
struct OnnxModelMetadata {
  std::string backbone;
  std::string input_name = "input";
  TensorLayout layout = TensorLayout::nhwc;
  std::size_t output_width = 0;
  std::string channel_order = "BGR";
  std::array<double, 3> means_bgr{};
};

OnnxModelMetadata parse_onnx_metadata(const std::filesystem::path& path);
/// `<model>.json` next to `<model>.onnx`.
std::filesystem::path onnx_metadata_path(const std::filesystem::path& model_path);

/// True when the build links ONNX Runtime.
bool onnx_runtime_available() noexcept;

/// Runs a frozen feature-extraction graph through ONNX Runtime.
/// Throws Error(provider) when built without ONNX Runtime support.
std::unique_ptr<DeepFeatureProvider> make_onnx_provider(const std::filesystem::path& model_path,
                                                        std::size_t expected_width);

/// Rows in input order. Throws Error(lookup) / Error(provider) naming the failing sample.
DeepFeatureMatrix deep_features(const DeepFeatureProvider& provider,
                                std::span<const DeepSample> samples, int jobs = 1);

// --- Kernel PCA --------------------------------------------------------------

enum class KernelKind { linear, rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  /// RBF width; 0 selects 1 / input_width.
  double gamma = 0.0;
};

inline constexpr double kEigenvalueTolerance = 1e-10;

struct KpcaModel {
  KernelSpec kernel;
  std::size_t input_width = 0;
  Eigen::VectorXd eigenvalues;  // descending, all > tolerance * max

  // Linear kernel: score = (x - mean) * projection.
  Eigen::VectorXd mean;
  Eigen::MatrixXd projection;  // input_width x k

  // RBF kernel: centered kernel row against the references, times coefficients.
  RowMatrix references;
  Eigen::VectorXd kernel_col_means;
  double kernel_grand_mean = 0.0;
  Eigen::MatrixXd coefficients;  // n_train x k, eigenvectors scaled by 1/sqrt(lambda)

  std::size_t components() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
  double effective_gamma() const noexcept;
};

struct KpcaFit {
  KpcaModel model;
  RowMatrix scores;  // n_train x k
  std::size_t requested = 0;
  bool clamped = false;  // fewer components than requested
};

KpcaFit kpca_fit(const FloatRowMatrix& X, int k, const KernelSpec& kernel = {});
KpcaFit kpca_fit(const RowMatrix& X, int k, const KernelSpec& kernel = {});

RowMatrix kpca_transform(const KpcaModel& model, const FloatRowMatrix& X);
RowMatrix kpca_transform(const KpcaModel& model, const RowMatrix& X);

}  // namespace radfuse
