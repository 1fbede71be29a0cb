#include "radfuse/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "radfuse/random.hpp"

namespace radfuse {

StandardizerModel standardize_fit(const RowMatrix& X) {
  if (X.rows() < 1) fail(ErrorKind::argument, "standardize_fit: no rows");
  StandardizerModel m;
  const auto n = static_cast<double>(X.rows());
  m.mean = X.colwise().sum().transpose() / n;
  m.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - m.mean[j]).square().sum() / n;
    const double sd = std::sqrt(var);
    m.scale[j] = sd < 1e-12 ? 1.0 : sd;
  }
  return m;
}

RowMatrix standardize_apply(const StandardizerModel& model, const RowMatrix& X) {
  if (static_cast<std::size_t>(X.cols()) != model.width()) {
    fail(ErrorKind::argument, "standardize_apply: width " + std::to_string(X.cols()) +
                                  " does not match fitted width " + std::to_string(model.width()));
  }
  RowMatrix out = X;
  out.rowwise() -= model.mean.transpose();
  out.array().rowwise() /= model.scale.transpose().array();
  return out;
}

RowMatrix standardize_invert(const StandardizerModel& model, const RowMatrix& X) {
  if (static_cast<std::size_t>(X.cols()) != model.width()) {
    fail(ErrorKind::argument, "standardize_invert: width mismatch");
  }
  RowMatrix out = X;
  out.array().rowwise() *= model.scale.transpose().array();
  out.rowwise() += model.mean.transpose();
  return out;
}

void SvmTrainConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) fail(ErrorKind::config, "svm: C must be positive");
  if (!(tol > 0.0)) fail(ErrorKind::config, "svm: tol must be positive");
  if (max_iter < 1) fail(ErrorKind::config, "svm: max_iter must be positive");
}

double svm_primal_objective(const BinarySvm& m, const RowMatrix& X, std::span<const int> y, double C) {
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double margin = y[static_cast<std::size_t>(i)] * (X.row(i).dot(m.w) + m.b);
    hinge += std::max(0.0, 1.0 - margin);
  }
  return 0.5 * (m.w.squaredNorm() + m.b * m.b) + C * hinge;
}

BinarySvmFit train_binary_svm(const RowMatrix& X, std::span<const int> y, double C, double tol,
                              int max_iter, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (static_cast<std::size_t>(n) != y.size()) fail(ErrorKind::argument, "svm: label count mismatch");
  if (n < 1) fail(ErrorKind::argument, "svm: no training rows");

  BinarySvmFit fit;
  fit.machine.w = Eigen::VectorXd::Zero(d);
  double& b = fit.machine.b;
  Eigen::VectorXd& w = fit.machine.w;
  Eigen::VectorXd& alpha = fit.alpha;
  alpha = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd diag(n);
  for (Eigen::Index i = 0; i < n; ++i) diag[i] = X.row(i).squaredNorm() + 1.0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);

  double alpha_sum = 0.0;
  double previous_dual = 0.0;
  BinarySvmTrace& trace = fit.trace;
  for (int epoch = 0; epoch < max_iter; ++epoch) {
    seeded_shuffle(order, rng);
    for (Eigen::Index i : order) {
      const double yi = y[static_cast<std::size_t>(i)];
      const double grad = yi * (X.row(i).dot(w) + b) - 1.0;
      const double a = alpha[i];
      double projected = grad;
      if (a <= 0.0) {
        projected = std::min(grad, 0.0);
      } else if (a >= C) {
        projected = std::max(grad, 0.0);
      }
      if (projected == 0.0) continue;
      const double updated = std::clamp(a - grad / diag[i], 0.0, C);
      const double delta = (updated - a) * yi;
      if (delta == 0.0) continue;
      alpha[i] = updated;
      alpha_sum += updated - a;
      w.noalias() += delta * X.row(i).transpose();
      b += delta;
    }
    trace.epochs = epoch + 1;

    const double dual = alpha_sum - 0.5 * (w.squaredNorm() + b * b);
    const double primal = svm_primal_objective(fit.machine, X, y, C);
    if (!trace.dual_objective.empty() &&
        dual < previous_dual - 1e-12 * std::max(1.0, std::abs(previous_dual))) {
      trace.dual_monotone = false;
    }
    trace.dual_objective.push_back(dual);
    previous_dual = dual;
    trace.primal_objective = primal;
    trace.gap = primal - dual;
    if (trace.gap <= tol * std::max(1.0, std::abs(primal))) {
      trace.converged = true;
      break;
    }
  }
  return fit;
}

bool SvmFit::converged() const noexcept {
  return std::all_of(traces.begin(), traces.end(), [](const auto& t) { return t.converged; });
}

SvmFit svm_fit(const RowMatrix& X, std::span<const ClassLabel> y, const SvmTrainConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    fail(ErrorKind::argument, "svm_fit: label count does not match rows");
  }
  if (X.rows() < 2) fail(ErrorKind::argument, "svm_fit: need at least 2 training rows");
  std::array<bool, kNumClasses> present{};
  for (ClassLabel l : y) present[class_index(l)] = true;
  if (std::count(present.begin(), present.end(), true) < 2) {
    fail(ErrorKind::argument, "svm_fit: training labels contain a single class");
  }

  SvmFit fit;
  fit.model.C = cfg.C;
  std::vector<int> binary(y.size());
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t i = 0; i < y.size(); ++i) binary[i] = class_index(y[i]) == c ? 1 : -1;
    auto machine = train_binary_svm(X, binary, cfg.C, cfg.tol, cfg.max_iter,
                                    cfg.seed + static_cast<std::uint64_t>(c));
    fit.model.weights[c] = std::move(machine.machine.w);
    fit.model.bias[c] = machine.machine.b;
    fit.traces[c] = std::move(machine.trace);
  }
  return fit;
}

std::array<double, kNumClasses> svm_decision(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.width()) {
    fail(ErrorKind::argument, "svm_decision: width " + std::to_string(x.size()) +
                                  " does not match model width " + std::to_string(model.width()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  std::array<double, kNumClasses> s{};
  for (int c = 0; c < kNumClasses; ++c) s[c] = model.weights[c].dot(v) + model.bias[c];
  return s;
}

ClassLabel argmax_label(const std::array<double, kNumClasses>& scores) noexcept {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return class_from_index(best);
}

std::vector<ClassLabel> svm_predict(const SvmModel& model, const RowMatrix& X) {
  std::vector<ClassLabel> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd row = X.row(i).transpose();
    out.push_back(argmax_label(svm_decision(model, std::span(row.data(), row.size()))));
  }
  return out;
}

}  // namespace radfuse
