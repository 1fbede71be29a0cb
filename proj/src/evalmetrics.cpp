#include "radfuse/evalmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace radfuse {

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto v : row) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(int c) const noexcept {
  std::uint64_t t = 0;
  for (auto v : counts[c]) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(int c) const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : counts) t += row[c];
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const ClassLabel> y_true, std::span<const ClassLabel> y_pred) {
  if (y_true.size() != y_pred.size()) fail(ErrorKind::argument, "confusion_matrix: length mismatch");
  ConfusionMatrix cm;
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    const int t = class_index(y_true[k]), p = class_index(y_pred[k]);
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) {
      fail(ErrorKind::argument, "confusion_matrix: unknown label");
    }
    ++cm.counts[t][p];
  }
  return cm;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) fail(ErrorKind::argument, "confusion_matrix: length mismatch");
  ConfusionMatrix cm;
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    const int t = y_true[k], p = y_pred[k];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) {
      fail(ErrorKind::argument, "confusion_matrix: unknown label " +
                                    std::to_string(t < 0 || t >= kNumClasses ? t : p));
    }
    ++cm.counts[t][p];
  }
  return cm;
}

MacroMetrics macro_metrics(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) fail(ErrorKind::argument, "macro_metrics: empty confusion matrix");
  MacroMetrics m;
  std::uint64_t trace = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto tp = cm.counts[c][c];
    trace += tp;
    const auto col = cm.col_sum(c), row = cm.row_sum(c);
    ClassMetrics& pc = m.per_class[c];
    const std::string name(to_string(class_from_index(c)));
    if (col > 0) {
      pc.precision = static_cast<double>(tp) / static_cast<double>(col);
    } else {
      m.warnings.push_back("precision undefined for class " + name + " (never predicted)");
    }
    if (row > 0) {
      pc.recall = static_cast<double>(tp) / static_cast<double>(row);
    } else {
      m.warnings.push_back("recall undefined for class " + name + " (no true samples)");
    }
    const double denom = pc.precision + pc.recall;
    pc.f1 = denom > 0.0 ? 2.0 * pc.precision * pc.recall / denom : 0.0;
    m.precision += pc.precision / kNumClasses;
    m.recall += pc.recall / kNumClasses;
    m.f1 += pc.f1 / kNumClasses;
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return m;
}

double confidence_interval(double metric, std::size_t n) {
  if (!(metric >= 0.0 && metric <= 1.0)) {
    fail(ErrorKind::argument, "confidence_interval: metric outside [0, 1]");
  }
  if (n < 1) fail(ErrorKind::argument, "confidence_interval: n must be positive");
  return 1.96 * std::sqrt(metric * (1.0 - metric) / static_cast<double>(n));
}

CovidRates covid_rates(const ConfusionMatrix& cm) {
  constexpr int covid = class_index(ClassLabel::covid);
  CovidRates r;
  const auto covid_total = cm.row_sum(covid);
  const auto others_total = cm.total() - covid_total;
  const auto tp = cm.counts[covid][covid];
  if (covid_total > 0) {
    r.false_negative_rate = static_cast<double>(covid_total - tp) / static_cast<double>(covid_total);
  }
  if (others_total > 0) {
    r.false_positive_rate = static_cast<double>(cm.col_sum(covid) - tp) / static_cast<double>(others_total);
  }
  return r;
}

EvalReport make_report(std::string name, const ConfusionMatrix& cm) {
  EvalReport r;
  r.name = std::move(name);
  r.confusion = cm;
  r.metrics = macro_metrics(cm);
  r.n_test = cm.total();
  r.accuracy_ci = confidence_interval(r.metrics.accuracy, r.n_test);
  r.f1_ci = confidence_interval(r.metrics.f1, r.n_test);
  r.covid = covid_rates(cm);
  return r;
}

std::string report_json(const EvalReport& r, int indent) {
  nlohmann::json per_class = nlohmann::json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& pc = r.metrics.per_class[c];
    per_class[std::string(to_string(class_from_index(c)))] = {
        {"precision", pc.precision}, {"recall", pc.recall}, {"f1", pc.f1}};
  }
  nlohmann::json cm = nlohmann::json::array();
  for (const auto& row : r.confusion.counts) cm.push_back(row);
  auto optional = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j = {
      {"name", r.name},
      {"n_test", r.n_test},
      {"classes", {"covid", "normal", "pneumonia"}},
      {"accuracy", r.metrics.accuracy},
      {"accuracy_ci95", r.accuracy_ci},
      {"macro_precision", r.metrics.precision},
      {"macro_recall", r.metrics.recall},
      {"macro_f1", r.metrics.f1},
      {"macro_f1_ci95", r.f1_ci},
      {"per_class", per_class},
      {"covid_false_negative_rate", optional(r.covid.false_negative_rate)},
      {"covid_false_positive_rate", optional(r.covid.false_positive_rate)},
      {"confusion_matrix", cm},
      {"warnings", r.metrics.warnings},
  };
  return j.dump(indent);
}

std::string format_table(std::span<const EvalReport> reports) {
  std::size_t name_width = 5;
  for (const auto& r : reports) name_width = std::max(name_width, r.name.size());
  std::ostringstream out;
  auto pad = [&](const std::string& s) { return s + std::string(name_width - s.size(), ' '); };
  auto rate = [](const std::optional<double>& v) {
    if (!v) return std::string("   n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%5.2f%%", 100.0 * *v);
    return std::string(buf);
  };
  out << pad("model") << "  accuracy          macro F1          covid FNR  covid FPR     n\n";
  for (const auto& r : reports) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %.3f ± %.3f     %.3f ± %.3f     %s     %s  %5zu\n",
                  r.metrics.accuracy, r.accuracy_ci, r.metrics.f1, r.f1_ci,
                  rate(r.covid.false_negative_rate).c_str(),
                  rate(r.covid.false_positive_rate).c_str(), r.n_test);
    out << pad(r.name) << buf;
  }
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\predicted,covid,normal,pneumonia\n";
  for (int t = 0; t < kNumClasses; ++t) {
    out << to_string(class_from_index(t));
    for (int p = 0; p < kNumClasses; ++p) out << ',' << cm.counts[t][p];
    out << '\n';
  }
  return out.str();
}

void write_confusion_png(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  constexpr int cell = 120, margin = 110;
  const int size = margin + kNumClasses * cell + 20;
  cv::Mat img(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  for (int t = 0; t < kNumClasses; ++t) {
    const double row_total = static_cast<double>(std::max<std::uint64_t>(1, cm.row_sum(t)));
    for (int p = 0; p < kNumClasses; ++p) {
      const double frac = static_cast<double>(cm.counts[t][p]) / row_total;
      // White -> dark blue.
      const cv::Scalar color(255 - 100 * frac, 255 - 200 * frac, 255 - 220 * frac);
      const cv::Point tl(margin + p * cell, margin + t * cell);
      cv::rectangle(img, cv::Rect(tl.x, tl.y, cell, cell), color, cv::FILLED);
      cv::rectangle(img, cv::Rect(tl.x, tl.y, cell, cell), cv::Scalar(80, 80, 80), 1);
      const std::string text = std::to_string(cm.counts[t][p]);
      const cv::Scalar ink = frac > 0.5 ? cv::Scalar(255, 255, 255) : cv::Scalar(0, 0, 0);
      cv::putText(img, text, {tl.x + 20, tl.y + cell / 2 + 10}, font, 0.8, ink, 2);
    }
    const std::string name(to_string(class_from_index(t)));
    cv::putText(img, name, {5, margin + t * cell + cell / 2 + 5}, font, 0.5, cv::Scalar(0, 0, 0), 1);
    cv::putText(img, name, {margin + t * cell + 10, margin - 15}, font, 0.5, cv::Scalar(0, 0, 0), 1);
  }
  cv::putText(img, "true \\ predicted", {5, 30}, font, 0.5, cv::Scalar(0, 0, 0), 1);
  if (!cv::imwrite(path.string(), img)) {
    fail(ErrorKind::data, "cannot write confusion heatmap: " + path.string());
  }
}

}  // namespace radfuse
