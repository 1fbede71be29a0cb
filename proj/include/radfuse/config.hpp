#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radfuse/classifier.hpp"
#include "radfuse/deepfeat.hpp"
#include "radfuse/handcrafted.hpp"
#include "radfuse/preprocess.hpp"

namespace radfuse {

enum class DeepBackend { precomputed, onnx };

struct DeepConfig {
  DeepBackend backend = DeepBackend::precomputed;
  std::filesystem::path model_path;    // onnx
  std::filesystem::path feature_path;  // precomputed
  std::size_t width = 0;
};

struct KpcaConfig {
  int k = 1000;
  KernelSpec kernel;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  bool stratified = true;

  void validate() const;
};

struct PathsConfig {
  std::filesystem::path manifest;
  std::filesystem::path model_out;
  std::filesystem::path report_out;
  std::filesystem::path handcrafted_features;  // optional RFF1 cache from `extract`
};

struct RunConfig {
  std::string name = "model";
  PreprocessConfig preprocess;
  std::vector<FeatureGroup> groups{kAllGroups.begin(), kAllGroups.end()};
  std::optional<DeepConfig> deep;
  KpcaConfig kpca;
  SvmTrainConfig svm;
  SplitSpec split;
  PathsConfig paths;
  bool record_timestamp = false;

  void validate() const;
};

/// Strict parse: unknown keys and wrong types are Error(config). Relative paths are
/// resolved against base_dir.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

std::string_view to_string(DeepBackend backend) noexcept;
std::string_view to_string(KernelKind kind) noexcept;

nlohmann::json preprocess_to_json(const PreprocessConfig& cfg);
PreprocessConfig preprocess_from_json(const nlohmann::json& j);
nlohmann::json deep_to_json(const DeepConfig& cfg);
DeepConfig deep_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

}  // namespace radfuse
