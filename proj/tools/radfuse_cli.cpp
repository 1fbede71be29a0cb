// radfuse: extract / train / eval / predict over chest X-ray manifests.
// stdout carries machine-readable output only; progress and warnings go to stderr.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "radfuse/common.hpp"
#include "radfuse/config.hpp"
#include "radfuse/evalmetrics.hpp"
#include "radfuse/pipeline.hpp"
#include "radfuse/rff.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radfuse;

namespace {

int default_jobs() {
  if (const char* env = std::getenv("RADFUSE_JOBS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid RADFUSE_JOBS='" << env << "'\n";
  }
  return 1;
}

ExtractOptions extract_options(int jobs, bool quiet) {
  ExtractOptions opts;
  opts.jobs = jobs;
  if (!quiet) {
    opts.progress = [](std::size_t done, std::size_t total) {
      if (done == total || done % 50 == 0) std::cerr << "\rextracting " << done << "/" << total << std::flush;
      if (done == total) std::cerr << "\n";
    };
  }
  return opts;
}

std::vector<FeatureGroup> parse_groups(const std::string& spec) {
  if (spec == "all") return {kAllGroups.begin(), kAllGroups.end()};
  std::vector<FeatureGroup> groups;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) groups.push_back(parse_group(item));
  }
  if (groups.empty()) fail(ErrorKind::config, "--groups: no feature groups given");
  return canonical_groups(groups);
}

std::vector<ColumnGroup> group_layout(const std::vector<FeatureGroup>& groups) {
  std::vector<ColumnGroup> layout;
  std::size_t offset = 0;
  for (FeatureGroup g : groups) {
    layout.push_back({std::string(to_string(g)), offset, group_width(g)});
    offset += group_width(g);
  }
  return layout;
}

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) fail(ErrorKind::config, what + " not given");
  if (!fs::exists(path)) fail(ErrorKind::config, what + " not found: " + path.string());
}

// `--set a.b=value`: value parsed as JSON when possible, else taken as a string.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) fail(ErrorKind::config, "--set expects key.path=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::string pointer;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) pointer += "/" + part;
  doc[json::json_pointer(pointer)] = value;
}

RunConfig load_config_with_overrides(const fs::path& path, const std::vector<std::string>& overrides) {
  require_file(path, "config");
  std::ifstream in(path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) fail(ErrorKind::config, "config is not valid JSON: " + path.string());
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_run_config(doc, fs::absolute(path).parent_path());
}

std::unique_ptr<DeepFeatureProvider> provider_for(const std::optional<DeepConfig>& deep,
                                                  const PreprocessConfig& preprocess,
                                                  const fs::path& feature_override) {
  if (!deep) return nullptr;
  DeepConfig cfg = *deep;
  if (!feature_override.empty()) {
    cfg.backend = DeepBackend::precomputed;
    cfg.feature_path = feature_override;
  }
  return make_provider(cfg, preprocess);
}

RunConfig extraction_config(const PipelineModel& model) {
  RunConfig rc;
  rc.name = model.name;
  rc.preprocess = model.preprocess;
  rc.groups = model.groups;
  rc.deep = model.deep;
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::data, "cannot write " + path.string());
  out << text;
}

// --- extract -----------------------------------------------------------------------

struct ExtractArgs {
  fs::path manifest, out, config, deep_out, deep_model, deep_features;
  std::string groups = "all";
  std::string deep_backend;
  std::size_t deep_width = 0;
  int jobs = 1;
  bool quiet = false;
};

int cmd_extract(const ExtractArgs& a) {
  require_file(a.manifest, "manifest");
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config_with_overrides(a.config, {});
  cfg.groups = parse_groups(a.groups);
  cfg.deep.reset();
  cfg.paths.handcrafted_features.clear();
  if (!a.deep_backend.empty()) {
    if (a.deep_out.empty()) fail(ErrorKind::config, "--deep-backend requires --deep-out");
    DeepConfig deep;
    if (a.deep_backend == "onnx") {
      deep.backend = DeepBackend::onnx;
      deep.model_path = a.deep_model;
    } else if (a.deep_backend == "precomputed") {
      deep.feature_path = a.deep_features;
    } else {
      fail(ErrorKind::config, "--deep-backend must be onnx or precomputed");
    }
    deep.width = a.deep_width;
    cfg.deep = deep;
  }
  const LabeledDataset ds = ingest(a.manifest);
  const auto provider = provider_for(cfg.deep, cfg.preprocess, {});
  const RawFeatures raw = extract_features(ds, cfg, provider.get(), extract_options(a.jobs, a.quiet));

  RffHeader header;
  header.n_samples = raw.size();
  header.n_features = static_cast<std::size_t>(raw.handcrafted.cols());
  header.dtype = RffDtype::f64;
  header.ids = raw.ids;
  header.extractor = "radfuse-handcrafted";
  header.group_layout = group_layout(cfg.groups);
  write_rff(a.out, header,
            std::span<const double>(raw.handcrafted.data(), static_cast<std::size_t>(raw.handcrafted.size())));
  std::cerr << "wrote " << a.out.string() << " (" << header.n_samples << " x " << header.n_features << ")\n";

  if (raw.deep) {
    RffHeader dh;
    dh.n_samples = raw.size();
    dh.n_features = static_cast<std::size_t>(raw.deep->values.cols());
    dh.dtype = RffDtype::f32;
    dh.ids = raw.deep->ids;
    dh.extractor = provider->describe();
    dh.group_layout = {{"deep", 0, dh.n_features}};
    write_rff(a.deep_out, dh,
              std::span<const float>(raw.deep->values.data(), static_cast<std::size_t>(raw.deep->values.size())));
    std::cerr << "wrote " << a.deep_out.string() << " (" << dh.n_samples << " x " << dh.n_features << ")\n";
  }
  return 0;
}

// --- train -------------------------------------------------------------------------

struct TrainArgs {
  fs::path config;
  std::vector<std::string> overrides;
  int jobs = 1;
  bool quiet = false;
};

json trace_json(const std::array<BinarySvmTrace, kNumClasses>& traces) {
  json out = json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& t = traces[c];
    out.push_back({{"class", to_string(class_from_index(c))},
                   {"epochs", t.epochs},
                   {"converged", t.converged},
                   {"duality_gap", t.gap},
                   {"primal_objective", t.primal_objective},
                   {"dual_monotone", t.dual_monotone}});
  }
  return out;
}

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = load_config_with_overrides(a.config, a.overrides);
  require_file(cfg.paths.manifest, "paths.manifest");
  if (cfg.paths.model_out.empty()) fail(ErrorKind::config, "paths.model_out not given");

  const LabeledDataset ds = ingest(cfg.paths.manifest);
  const auto provider = provider_for(cfg.deep, cfg.preprocess, {});
  const ExperimentResult result = run_experiment(ds, cfg, provider.get(), extract_options(a.jobs, a.quiet));
  for (const auto& w : result.train.warnings) std::cerr << "warning: " << w << "\n";

  if (cfg.paths.model_out.has_parent_path()) fs::create_directories(cfg.paths.model_out.parent_path());
  save_model(result.train.model, cfg.paths.model_out);

  const json report = {
      {"name", cfg.name},
      {"model", cfg.paths.model_out.string()},
      {"n_train", result.split.train.size()},
      {"n_test", result.split.test.size()},
      {"dataset_hash", result.train.model.provenance.dataset_hash},
      {"fused_width", result.train.model.fused_width()},
      {"train_accuracy", result.train.train_accuracy},
      {"kpca", {{"requested_k", result.train.requested_k}, {"effective_k", result.train.effective_k}}},
      {"svm", trace_json(result.train.svm_traces)},
      {"warnings", result.train.warnings},
      {"test", json::parse(report_json(result.report))},
  };
  const std::string text = report.dump(2) + "\n";
  if (!cfg.paths.report_out.empty()) write_text(cfg.paths.report_out, text);
  std::cout << text;
  std::cerr << format_table(std::span(&result.report, 1));
  return 0;
}

// --- eval --------------------------------------------------------------------------

struct EvalArgs {
  std::vector<fs::path> models;
  fs::path manifest, deep_features, cm_csv, cm_png;
  std::string split;
  int jobs = 1;
  bool quiet = false;
};

fs::path per_model_path(const fs::path& base, const std::string& name, bool several) {
  if (!several) return base;
  fs::path p = base;
  p.replace_filename(base.stem().string() + "_" + name + base.extension().string());
  return p;
}

int cmd_eval(const EvalArgs& a) {
  if (!a.split.empty() && a.split != "test") fail(ErrorKind::config, "--split accepts only 'test'");
  if (a.split.empty() && a.manifest.empty()) fail(ErrorKind::config, "eval needs --manifest or --split test");
  if (!a.manifest.empty()) require_file(a.manifest, "manifest");

  std::vector<EvalReport> reports;
  for (const auto& model_path : a.models) {
    require_file(model_path, "model");
    const PipelineModel model = load_model(model_path);
    LabeledDataset ds;
    if (a.split == "test") {
      const fs::path source = a.manifest.empty() ? fs::path(model.provenance.manifest) : a.manifest;
      if (source.empty()) fail(ErrorKind::config, "model records no manifest; pass --manifest");
      const LabeledDataset full = ingest(source);
      if (dataset_hash(full) != model.provenance.dataset_hash) {
        fail(ErrorKind::data, "dataset " + source.string() + " differs from the one the model was trained on");
      }
      ds = split(full, model.split).test;
    } else {
      ds = ingest(a.manifest);
    }
    const auto provider = provider_for(model.deep, model.preprocess, a.deep_features);
    const RawFeatures raw = extract_features(ds, extraction_config(model), provider.get(),
                                             extract_options(a.jobs, a.quiet));
    EvalReport report = evaluate(model, raw);
    report.name = model.name;
    reports.push_back(std::move(report));
  }

  json out = json::array();
  for (const auto& r : reports) out.push_back(json::parse(report_json(r)));
  std::cout << out.dump(2) << "\n";
  std::cerr << format_table(reports);

  const bool several = reports.size() > 1;
  for (const auto& r : reports) {
    if (!a.cm_csv.empty()) write_text(per_model_path(a.cm_csv, r.name, several), confusion_csv(r.confusion));
    if (!a.cm_png.empty()) write_confusion_png(r.confusion, per_model_path(a.cm_png, r.name, several));
  }
  return 0;
}

// --- predict -----------------------------------------------------------------------

struct PredictArgs {
  fs::path model, deep_features;
  std::vector<std::string> images;
  std::string format = "jsonl";
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

int cmd_predict(const PredictArgs& a) {
  if (a.format != "jsonl" && a.format != "csv") fail(ErrorKind::config, "--format must be jsonl or csv");
  require_file(a.model, "model");
  const PipelineModel model = load_model(a.model);
  const auto provider = provider_for(model.deep, model.preprocess, a.deep_features);

  const bool csv = a.format == "csv";
  if (csv) std::cout << "image,label,score_covid,score_normal,score_pneumonia,error\n";
  int status = 0;
  for (const auto& image : a.images) {
    try {
      const Prediction p = predict(model, image, provider.get());
      if (csv) {
        std::ostringstream line;
        line.precision(17);
        line << csv_field(image) << "," << to_string(p.label);
        for (double s : p.scores) line << "," << s;
        std::cout << line.str() << ",\n";
      } else {
        json scores;
        for (int c = 0; c < kNumClasses; ++c) scores[std::string(to_string(class_from_index(c)))] = p.scores[c];
        std::cout << json{{"image", image}, {"label", to_string(p.label)}, {"scores", scores}}.dump() << "\n";
      }
    } catch (const Error& e) {
      status = 3;
      if (csv) {
        std::cout << csv_field(image) << ",,,,," << csv_field(e.what()) << "\n";
      } else {
        std::cout << json{{"image", image}, {"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}}.dump()
                  << "\n";
      }
      std::cerr << "error: " << image << ": " << e.what() << "\n";
    }
    std::cout.flush();
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radfuse: handcrafted + deep feature fusion classifier for chest X-rays"};
  app.require_subcommand(1);
  const int jobs_default = default_jobs();

  ExtractArgs ex;
  ex.jobs = jobs_default;
  auto* extract = app.add_subcommand("extract", "Compute handcrafted (and optionally deep) feature files");
  extract->add_option("--manifest", ex.manifest, "Manifest CSV or class-folder directory")->required();
  extract->add_option("--out", ex.out, "Handcrafted RFF1 output")->required();
  extract->add_option("--groups", ex.groups, "'all' or comma list of texture,glcm,gldm,fft,wavelet,lbp");
  extract->add_option("--config", ex.config, "Run config supplying preprocessing parameters");
  extract->add_option("--deep-backend", ex.deep_backend, "onnx | precomputed");
  extract->add_option("--deep-model", ex.deep_model, "ONNX graph (onnx backend)");
  extract->add_option("--deep-features", ex.deep_features, "RFF1 feature file (precomputed backend)");
  extract->add_option("--deep-width", ex.deep_width, "Expected deep feature width");
  extract->add_option("--deep-out", ex.deep_out, "Deep RFF1 output");
  extract->add_option("--jobs", ex.jobs, "Worker threads (default RADFUSE_JOBS or 1)")->check(CLI::PositiveNumber);
  extract->add_flag("--quiet", ex.quiet, "No progress output");

  TrainArgs tr;
  tr.jobs = jobs_default;
  auto* train = app.add_subcommand("train", "Split, fit and save a model; report held-out metrics");
  train->add_option("--config", tr.config, "Run config JSON")->required();
  train->add_option("--set", tr.overrides, "Config override key.path=value (repeatable)");
  train->add_option("--jobs", tr.jobs, "Worker threads (default RADFUSE_JOBS or 1)")->check(CLI::PositiveNumber);
  train->add_flag("--quiet", tr.quiet, "No progress output");

  EvalArgs ev;
  ev.jobs = jobs_default;
  auto* eval = app.add_subcommand("eval", "Evaluate one or more models");
  eval->add_option("--model", ev.models, "Model file (repeatable)")->required();
  eval->add_option("--manifest", ev.manifest, "Evaluate every sample of this manifest");
  eval->add_option("--split", ev.split, "'test': re-split the training manifest and use the held-out part");
  eval->add_option("--deep-features", ev.deep_features, "Precomputed deep feature file override");
  eval->add_option("--cm-csv", ev.cm_csv, "Confusion matrix CSV output");
  eval->add_option("--cm-png", ev.cm_png, "Confusion matrix heatmap PNG output");
  eval->add_option("--jobs", ev.jobs, "Worker threads (default RADFUSE_JOBS or 1)")->check(CLI::PositiveNumber);
  eval->add_flag("--quiet", ev.quiet, "No progress output");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Classify images");
  predict_cmd->add_option("--model", pr.model, "Model file")->required();
  predict_cmd->add_option("--format", pr.format, "jsonl | csv");
  predict_cmd->add_option("--deep-features", pr.deep_features, "Precomputed deep feature file override");
  predict_cmd->add_option("images", pr.images, "Image files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*extract) return cmd_extract(ex);
    if (*train) return cmd_train(tr);
    if (*eval) return cmd_eval(ev);
    if (*predict_cmd) return cmd_predict(pr);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 4;
}
