#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radfuse/common.hpp"

namespace radfuse {

/// Rows are true classes, columns predicted classes, both in the fixed class order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const noexcept;
  std::uint64_t row_sum(int c) const noexcept;
  std::uint64_t col_sum(int c) const noexcept;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion_matrix(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred);
/// Integer-coded labels in [0, 3); anything else is an argument error.
ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MacroMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  /// Per-class metrics whose denominator was zero (reported as 0).
  std::vector<std::string> warnings;
};

/// Unweighted means over the three classes.
MacroMetrics macro_metrics(const ConfusionMatrix& cm);

/// 95% normal-approximation half-width: 1.96 * sqrt(m (1 - m) / n).
double confidence_interval(double metric, std::size_t n);

struct CovidRates {
  std::optional<double> false_negative_rate;  // nullopt when there are no covid cases
  std::optional<double> false_positive_rate;  // nullopt when there are no non-covid cases
};

CovidRates covid_rates(const ConfusionMatrix& cm);

struct EvalReport {
  std::string name;
  ConfusionMatrix confusion;
  MacroMetrics metrics;
  double accuracy_ci = 0.0;
  double f1_ci = 0.0;
  CovidRates covid;
  std::size_t n_test = 0;
};

EvalReport make_report(std::string name, const ConfusionMatrix& cm);

std::string report_json(const EvalReport& report, int indent = 2);
/// Aligned text table, one row per report: accuracy +- CI and macro F1 +- CI.
std::string format_table(std::span<const EvalReport> reports);
std::string confusion_csv(const ConfusionMatrix& cm);
/// Renders a labelled heatmap (row-normalized shading, raw counts printed in cells).
void write_confusion_png(const ConfusionMatrix& cm, const std::filesystem::path& path);

}  // namespace radfuse
