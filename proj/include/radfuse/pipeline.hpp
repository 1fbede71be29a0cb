#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radfuse/classifier.hpp"
#include "radfuse/config.hpp"
#include "radfuse/deepfeat.hpp"
#include "radfuse/evalmetrics.hpp"
#include "radfuse/handcrafted.hpp"

namespace radfuse {

struct Sample {
  std::string id;
  std::filesystem::path path;
  ClassLabel label = ClassLabel::covid;
};

/// Records sorted by id; ids unique.
struct LabeledDataset {
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  std::array<std::size_t, kNumClasses> class_counts() const;
};

/// Manifest CSV (header `id,path,label`; relative paths resolve against the manifest's
/// directory) or a directory with covid/normal/pneumonia subdirectories of PNG/JPEG files.
LabeledDataset ingest(const std::filesystem::path& source);
LabeledDataset ingest_manifest(const std::filesystem::path& manifest, bool check_files = true);
LabeledDataset ingest_directory(const std::filesystem::path& root);
/// Sorts by id and rejects duplicates.
LabeledDataset make_dataset(std::vector<Sample> samples);

void write_manifest(const LabeledDataset& ds, const std::filesystem::path& path);

/// CRC32 (hex) over the sorted `id,label` lines.
std::string dataset_hash(const LabeledDataset& ds);

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
};

/// Seeded split. Stratified mode apportions round(f * n) training samples across classes
/// by largest remainder, so every class lands within one sample of f * n_c.
DatasetSplit split(const LabeledDataset& ds, const SplitSpec& spec);

// --- Features ------------------------------------------------------------------

struct RawFeatures {
  std::vector<std::string> ids;
  std::vector<ClassLabel> labels;
  std::vector<FeatureGroup> groups;
  RowMatrix handcrafted;  // n x groups_width(groups)
  std::optional<DeepFeatureMatrix> deep;

  std::size_t size() const noexcept { return ids.size(); }
  /// Row subset in the given order.
  RawFeatures subset(std::span<const std::size_t> rows) const;
};

struct ExtractOptions {
  int jobs = 1;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

std::unique_ptr<DeepFeatureProvider> make_provider(const DeepConfig& cfg,
                                                   const PreprocessConfig& preprocess);

/// Per-image preprocessing and extraction. Any failure aborts with the sample id.
RawFeatures extract_features(const LabeledDataset& ds, const RunConfig& cfg,
                             const DeepFeatureProvider* provider, const ExtractOptions& opts = {});

/// Fused matrix [handcrafted | kpca-reduced deep] in fixed column order.
struct FeatureTable {
  std::vector<std::string> ids;
  RowMatrix values;
  std::vector<ColumnGroup> groups;
};

FeatureTable fuse(const RawFeatures& raw, const KpcaModel* kpca);
FeatureTable build_feature_table(const LabeledDataset& ds, const RunConfig& cfg,
                                 const DeepFeatureProvider* provider, const KpcaModel* kpca,
                                 const ExtractOptions& opts = {});

// --- Model -----------------------------------------------------------------------

struct Provenance {
  std::uint64_t split_seed = 0;
  std::uint64_t svm_seed = 0;
  std::string dataset_hash;
  std::string manifest;
  std::size_t n_train = 0;
  std::optional<std::string> created;
};

struct PipelineModel {
  std::string name;
  PreprocessConfig preprocess;
  std::vector<FeatureGroup> groups;
  std::optional<DeepConfig> deep;
  KpcaConfig kpca_config;
  std::optional<KpcaModel> kpca;
  SplitSpec split;
  StandardizerModel standardizer;
  SvmModel svm;
  Provenance provenance;

  std::size_t fused_width() const noexcept;
};

/// Receives the ids consumed by each fitting stage ("kpca_fit", "standardize_fit", "svm_fit").
class FitObserver {
public:
  virtual ~FitObserver() = default;
  virtual void on_fit(std::string_view stage, std::span<const std::string> ids) = 0;
};

struct TrainResult {
  PipelineModel model;
  std::array<BinarySvmTrace, kNumClasses> svm_traces;
  double train_accuracy = 0.0;
  std::size_t requested_k = 0;
  std::size_t effective_k = 0;
  std::vector<std::string> warnings;
};

/// kpca on the raw deep block -> fuse -> standardizer -> SVM, all on the given rows only.
TrainResult train_pipeline(const RawFeatures& train, const RunConfig& cfg,
                           FitObserver* observer = nullptr);

struct Prediction {
  ClassLabel label = ClassLabel::covid;
  std::array<double, kNumClasses> scores{};
};

std::vector<Prediction> predict_features(const PipelineModel& model, const RawFeatures& features);

/// Single image end to end. For the precomputed backend the lookup key is `id` when given,
/// else the path as passed, else `<parent dir>/<file name>`, else the file stem.
Prediction predict(const PipelineModel& model, const std::filesystem::path& image,
                   const DeepFeatureProvider* provider, const std::string& id = {});

EvalReport evaluate(const PipelineModel& model, const RawFeatures& test);

struct ExperimentResult {
  DatasetSplit split;
  TrainResult train;
  EvalReport report;
};

/// split -> extract train -> train_pipeline -> extract test -> evaluate.
ExperimentResult run_experiment(const LabeledDataset& ds, const RunConfig& cfg,
                                const DeepFeatureProvider* provider, const ExtractOptions& opts = {},
                                FitObserver* observer = nullptr);

// --- Persistence -------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const PipelineModel& model);
PipelineModel deserialize_model(const std::string& text);
void save_model(const PipelineModel& model, const std::filesystem::path& path);
/// Throws Error(version) on a different format version, Error(checksum) on tampering.
PipelineModel load_model(const std::filesystem::path& path);

}  // namespace radfuse
