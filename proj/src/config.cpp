#include "radfuse/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>

#include "radfuse/common.hpp"

namespace radfuse {
namespace {

using nlohmann::json;

void check_object(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) fail(ErrorKind::config, std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) fail(ErrorKind::config, std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& j, std::string_view where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::config, std::string(where) + "." + key + ": wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::string_view to_string(DeepBackend backend) noexcept {
  return backend == DeepBackend::onnx ? "onnx" : "precomputed";
}

std::string_view to_string(KernelKind kind) noexcept {
  return kind == KernelKind::rbf ? "rbf" : "linear";
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorKind::config, "split.train_fraction must lie in (0, 1)");
  }
}

void RunConfig::validate() const {
  preprocess.clahe.validate();
  svm.validate();
  split.validate();
  if (kpca.k <= 0) fail(ErrorKind::config, "kpca.k must be positive");
  if (groups.empty() && !deep) fail(ErrorKind::config, "no feature groups and no deep features enabled");
  if (deep && deep->width == 0) fail(ErrorKind::config, "features.deep.width must be positive");
}

json preprocess_to_json(const PreprocessConfig& cfg) {
  json clip = std::isfinite(cfg.clahe.clip_limit) ? json(cfg.clahe.clip_limit) : json("inf");
  return {{"tile_grid", {cfg.clahe.tiles_x, cfg.clahe.tiles_y}},
          {"clip_limit", clip},
          {"means_bgr", cfg.means_bgr}};
}

PreprocessConfig preprocess_from_json(const json& j) {
  PreprocessConfig cfg;
  check_object(j, "preprocess", {"tile_grid", "clip_limit", "means_bgr"});
  if (j.contains("tile_grid")) {
    const auto grid = get<std::vector<int>>(j, "preprocess", "tile_grid", {});
    if (grid.size() != 2) fail(ErrorKind::config, "preprocess.tile_grid must be [x, y]");
    cfg.clahe.tiles_x = grid[0];
    cfg.clahe.tiles_y = grid[1];
  }
  if (j.contains("clip_limit")) {
    const auto& c = j.at("clip_limit");
    if (c.is_string() && c.get<std::string>() == "inf") {
      cfg.clahe.clip_limit = std::numeric_limits<double>::infinity();
    } else if (c.is_number()) {
      cfg.clahe.clip_limit = c.get<double>();
    } else {
      fail(ErrorKind::config, "preprocess.clip_limit must be a number or \"inf\"");
    }
  }
  cfg.means_bgr = get<std::array<double, 3>>(j, "preprocess", "means_bgr", cfg.means_bgr);
  try {
    cfg.clahe.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  return cfg;
}

json deep_to_json(const DeepConfig& cfg) {
  json j = {{"backend", to_string(cfg.backend)}, {"width", cfg.width}};
  if (cfg.backend == DeepBackend::onnx) {
    j["model_path"] = cfg.model_path.string();
  } else {
    j["feature_path"] = cfg.feature_path.string();
  }
  return j;
}

DeepConfig deep_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_object(j, "features.deep", {"backend", "model_path", "feature_path", "width"});
  DeepConfig cfg;
  const auto backend = get<std::string>(j, "features.deep", "backend", "precomputed");
  if (backend == "precomputed") {
    cfg.backend = DeepBackend::precomputed;
    cfg.feature_path = resolve(base_dir, get<std::string>(j, "features.deep", "feature_path", ""));
    if (cfg.feature_path.empty()) fail(ErrorKind::config, "features.deep.feature_path is required");
  } else if (backend == "onnx") {
    cfg.backend = DeepBackend::onnx;
    cfg.model_path = resolve(base_dir, get<std::string>(j, "features.deep", "model_path", ""));
    if (cfg.model_path.empty()) fail(ErrorKind::config, "features.deep.model_path is required");
  } else {
    fail(ErrorKind::config, "features.deep.backend must be 'precomputed' or 'onnx'");
  }
  cfg.width = get<std::size_t>(j, "features.deep", "width", 0);
  if (cfg.width == 0) fail(ErrorKind::config, "features.deep.width must be positive");
  return cfg;
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  check_object(j, "config",
               {"name", "preprocess", "features", "kpca", "svm", "split", "paths", "record_timestamp"});
  RunConfig cfg;
  cfg.name = get<std::string>(j, "config", "name", cfg.name);
  cfg.record_timestamp = get<bool>(j, "config", "record_timestamp", false);
  if (j.contains("preprocess")) cfg.preprocess = preprocess_from_json(j.at("preprocess"));

  if (j.contains("features")) {
    const auto& f = j.at("features");
    check_object(f, "features", {"groups", "deep"});
    if (f.contains("groups")) {
      const auto& g = f.at("groups");
      if (g.is_string() && g.get<std::string>() == "all") {
        cfg.groups.assign(kAllGroups.begin(), kAllGroups.end());
      } else if (g.is_array()) {
        std::vector<FeatureGroup> groups;
        for (const auto& name : g) {
          if (!name.is_string()) fail(ErrorKind::config, "features.groups entries must be strings");
          groups.push_back(parse_group(name.get<std::string>()));
        }
        cfg.groups = canonical_groups(groups);
      } else {
        fail(ErrorKind::config, "features.groups must be \"all\" or a list of group names");
      }
    }
    if (f.contains("deep") && !f.at("deep").is_null()) cfg.deep = deep_from_json(f.at("deep"), base_dir);
  }

  if (j.contains("kpca")) {
    const auto& k = j.at("kpca");
    check_object(k, "kpca", {"k", "kernel", "gamma"});
    cfg.kpca.k = get<int>(k, "kpca", "k", cfg.kpca.k);
    const auto kernel = get<std::string>(k, "kpca", "kernel", "linear");
    if (kernel == "linear") {
      cfg.kpca.kernel.kind = KernelKind::linear;
    } else if (kernel == "rbf") {
      cfg.kpca.kernel.kind = KernelKind::rbf;
    } else {
      fail(ErrorKind::config, "kpca.kernel must be 'linear' or 'rbf'");
    }
    cfg.kpca.kernel.gamma = get<double>(k, "kpca", "gamma", 0.0);
    if (cfg.kpca.kernel.gamma < 0) fail(ErrorKind::config, "kpca.gamma must be non-negative");
  }

  if (j.contains("svm")) {
    const auto& s = j.at("svm");
    check_object(s, "svm", {"C", "tol", "max_iter", "seed"});
    cfg.svm.C = get<double>(s, "svm", "C", cfg.svm.C);
    cfg.svm.tol = get<double>(s, "svm", "tol", cfg.svm.tol);
    cfg.svm.max_iter = get<int>(s, "svm", "max_iter", cfg.svm.max_iter);
    cfg.svm.seed = get<std::uint64_t>(s, "svm", "seed", cfg.svm.seed);
  }

  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_object(s, "split", {"train_fraction", "seed", "stratified"});
    cfg.split.train_fraction = get<double>(s, "split", "train_fraction", cfg.split.train_fraction);
    cfg.split.seed = get<std::uint64_t>(s, "split", "seed", cfg.split.seed);
    cfg.split.stratified = get<bool>(s, "split", "stratified", cfg.split.stratified);
  }

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_object(p, "paths", {"manifest", "model_out", "report_out", "handcrafted_features"});
    cfg.paths.manifest = resolve(base_dir, get<std::string>(p, "paths", "manifest", ""));
    cfg.paths.model_out = resolve(base_dir, get<std::string>(p, "paths", "model_out", ""));
    cfg.paths.report_out = resolve(base_dir, get<std::string>(p, "paths", "report_out", ""));
    cfg.paths.handcrafted_features =
        resolve(base_dir, get<std::string>(p, "paths", "handcrafted_features", ""));
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j, std::filesystem::absolute(path).parent_path());
}

json to_json(const RunConfig& cfg) {
  json groups = json::array();
  for (FeatureGroup g : cfg.groups) groups.push_back(to_string(g));
  json j = {
      {"name", cfg.name},
      {"preprocess", preprocess_to_json(cfg.preprocess)},
      {"features", {{"groups", groups}, {"deep", cfg.deep ? deep_to_json(*cfg.deep) : json(nullptr)}}},
      {"kpca", {{"k", cfg.kpca.k}, {"kernel", to_string(cfg.kpca.kernel.kind)}, {"gamma", cfg.kpca.kernel.gamma}}},
      {"svm", {{"C", cfg.svm.C}, {"tol", cfg.svm.tol}, {"max_iter", cfg.svm.max_iter}, {"seed", cfg.svm.seed}}},
      {"split",
       {{"train_fraction", cfg.split.train_fraction}, {"seed", cfg.split.seed}, {"stratified", cfg.split.stratified}}},
      {"paths",
       {{"manifest", cfg.paths.manifest.string()},
        {"model_out", cfg.paths.model_out.string()},
        {"report_out", cfg.paths.report_out.string()},
        {"handcrafted_features", cfg.paths.handcrafted_features.string()}}},
      {"record_timestamp", cfg.record_timestamp},
  };
  return j;
}

}  // namespace radfuse
