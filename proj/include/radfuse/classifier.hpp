#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "radfuse/common.hpp"
#include "radfuse/deepfeat.hpp"

namespace radfuse {

/// Per-column affine scaling fitted on training rows: x' = (x - mean) / scale.
struct StandardizerModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population std, 1 where std < 1e-12

  std::size_t width() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

StandardizerModel standardize_fit(const RowMatrix& X);
RowMatrix standardize_apply(const StandardizerModel& model, const RowMatrix& X);
RowMatrix standardize_invert(const StandardizerModel& model, const RowMatrix& X);

struct SvmTrainConfig {
  double C = 1.0;
  double tol = 1e-4;  // relative duality gap
  int max_iter = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One binary hinge-loss machine. The bias is the weight of an appended constant-1
/// feature and is therefore regularized like any other weight.
struct BinarySvm {
  Eigen::VectorXd w;
  double b = 0.0;
};

struct BinarySvmTrace {
  std::vector<double> dual_objective;  // after each epoch
  double primal_objective = 0.0;
  double gap = 0.0;
  int epochs = 0;
  bool converged = false;
  bool dual_monotone = true;
};

struct BinarySvmFit {
  BinarySvm machine;
  Eigen::VectorXd alpha;
  BinarySvmTrace trace;
};

/// Dual coordinate descent on min 1/2 |[w;b]|^2 + C sum max(0, 1 - y_i (w.x_i + b)),
/// y_i in {-1,+1}, with a seeded random permutation each epoch.
BinarySvmFit train_binary_svm(const RowMatrix& X, std::span<const int> y, double C, double tol,
                              int max_iter, std::uint64_t seed);

/// Primal objective of a binary machine (bias included in the regularizer).
double svm_primal_objective(const BinarySvm& m, const RowMatrix& X, std::span<const int> y, double C);

/// One-vs-all linear SVM over the fixed class order covid, normal, pneumonia.
struct SvmModel {
  std::array<Eigen::VectorXd, kNumClasses> weights;
  std::array<double, kNumClasses> bias{};
  double C = 1.0;

  std::size_t width() const noexcept { return static_cast<std::size_t>(weights[0].size()); }
};

struct SvmFit {
  SvmModel model;
  std::array<BinarySvmTrace, kNumClasses> traces;

  bool converged() const noexcept;
};

SvmFit svm_fit(const RowMatrix& X, std::span<const ClassLabel> y, const SvmTrainConfig& cfg);

std::array<double, kNumClasses> svm_decision(const SvmModel& model, std::span<const double> x);

/// Argmax with ties resolved towards the earlier class in the fixed order.
ClassLabel argmax_label(const std::array<double, kNumClasses>& scores) noexcept;

std::vector<ClassLabel> svm_predict(const SvmModel& model, const RowMatrix& X);

}  // namespace radfuse
