#include "radfuse/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "radfuse/common.hpp"
#include "radfuse/parallel.hpp"
#include "radfuse/preprocess.hpp"
#include "radfuse/random.hpp"

namespace radfuse {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  return out + "\"";
}

bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<ColumnGroup> handcrafted_layout(std::span<const FeatureGroup> groups) {
  std::vector<ColumnGroup> layout;
  std::size_t offset = 0;
  for (FeatureGroup g : groups) {
    layout.push_back({std::string(to_string(g)), offset, group_width(g)});
    offset += group_width(g);
  }
  return layout;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::array<std::size_t, kNumClasses> LabeledDataset::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& s : samples) ++counts[class_index(s.label)];
  return counts;
}

LabeledDataset make_dataset(std::vector<Sample> samples) {
  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].id == samples[i - 1].id) fail(ErrorKind::data, "duplicate sample id '" + samples[i].id + "'");
  }
  return LabeledDataset{std::move(samples)};
}

LabeledDataset ingest_manifest(const std::filesystem::path& manifest, bool check_files) {
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::data, "cannot open manifest: " + manifest.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, "empty manifest: " + manifest.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (header != std::vector<std::string>{"id", "path", "label"}) {
    fail(ErrorKind::data, "manifest header must be 'id,path,label': " + manifest.string());
  }
  const auto base = manifest.parent_path();
  std::vector<Sample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    if (fields.size() != 3) fail(ErrorKind::data, where + ": expected 3 fields");
    Sample s;
    s.id = trim(fields[0]);
    if (s.id.empty()) fail(ErrorKind::data, where + ": empty id");
    std::filesystem::path p(trim(fields[1]));
    s.path = p.is_absolute() ? p : base / p;
    const auto label = parse_label(fields[2]);
    if (!label) fail(ErrorKind::data, where + ": unknown label '" + trim(fields[2]) + "'");
    s.label = *label;
    if (check_files && !std::filesystem::exists(s.path)) {
      fail(ErrorKind::data, where + ": missing file " + s.path.string());
    }
    samples.push_back(std::move(s));
  }
  return make_dataset(std::move(samples));
}

LabeledDataset ingest_directory(const std::filesystem::path& root) {
  std::vector<Sample> samples;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const auto label = parse_label(entry.path().filename().string());
    if (!label) continue;
    for (const auto& file : std::filesystem::directory_iterator(entry.path())) {
      if (!file.is_regular_file() || !is_image_file(file.path())) continue;
      samples.push_back({std::string(to_string(*label)) + "/" + file.path().filename().string(),
                         file.path(), *label});
    }
  }
  if (samples.empty()) {
    fail(ErrorKind::data, "no images under covid/normal/pneumonia in " + root.string());
  }
  return make_dataset(std::move(samples));
}

LabeledDataset ingest(const std::filesystem::path& source) {
  if (std::filesystem::is_directory(source)) return ingest_directory(source);
  return ingest_manifest(source);
}

void write_manifest(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::data, "cannot write manifest: " + path.string());
  out << "id,path,label\n";
  const auto base = std::filesystem::absolute(path).parent_path();
  for (const auto& s : ds.samples) {
    const auto rel = std::filesystem::absolute(s.path).lexically_relative(base);
    const auto& shown = rel.empty() ? s.path : rel;
    out << csv_field(s.id) << ',' << csv_field(shown.generic_string()) << ',' << to_string(s.label) << '\n';
  }
}

std::string dataset_hash(const LabeledDataset& ds) {
  std::string text;
  for (const auto& s : ds.samples) {
    text += s.id;
    text += ',';
    text += to_string(s.label);
    text += '\n';
  }
  const auto crc = crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

DatasetSplit split(const LabeledDataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = ds.size();
  if (n < 2) fail(ErrorKind::argument, "split: need at least 2 samples");
  std::mt19937_64 rng(spec.seed);
  std::vector<bool> in_train(n, false);
  const auto target = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));

  if (spec.stratified) {
    std::array<std::vector<std::size_t>, kNumClasses> members;
    for (std::size_t i = 0; i < n; ++i) members[class_index(ds.samples[i].label)].push_back(i);

    std::array<std::size_t, kNumClasses> quota{};
    std::array<double, kNumClasses> remainder{};
    std::size_t assigned = 0;
    for (int c = 0; c < kNumClasses; ++c) {
      const std::size_t nc = members[c].size();
      if (nc == 1) {
        fail(ErrorKind::argument, "split: class '" + std::string(to_string(class_from_index(c))) +
                                      "' has a single sample; stratification needs at least 2");
      }
      const double exact = spec.train_fraction * static_cast<double>(nc);
      quota[c] = static_cast<std::size_t>(std::floor(exact));
      remainder[c] = exact - std::floor(exact);
      assigned += quota[c];
    }
    std::array<int, kNumClasses> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (int c : order) {
      if (assigned >= target) break;
      if (quota[c] < members[c].size()) {
        ++quota[c];
        ++assigned;
      }
    }
    for (int c = 0; c < kNumClasses; ++c) {
      auto idx = members[c];
      seeded_shuffle(idx, rng);
      for (std::size_t k = 0; k < quota[c]; ++k) in_train[idx[k]] = true;
    }
  } else {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    seeded_shuffle(idx, rng);
    for (std::size_t k = 0; k < target; ++k) in_train[idx[k]] = true;
  }

  DatasetSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? out.train : out.test).samples.push_back(ds.samples[i]);
  }
  return out;
}

RawFeatures RawFeatures::subset(std::span<const std::size_t> rows) const {
  RawFeatures out;
  out.groups = groups;
  out.handcrafted.resize(static_cast<Eigen::Index>(rows.size()), handcrafted.cols());
  if (deep) {
    out.deep.emplace();
    out.deep->values.resize(static_cast<Eigen::Index>(rows.size()), deep->values.cols());
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(rows[k]);
    out.ids.push_back(ids[rows[k]]);
    out.labels.push_back(labels[rows[k]]);
    out.handcrafted.row(static_cast<Eigen::Index>(k)) = handcrafted.row(r);
    if (deep) {
      out.deep->ids.push_back(deep->ids[rows[k]]);
      out.deep->values.row(static_cast<Eigen::Index>(k)) = deep->values.row(r);
    }
  }
  return out;
}

std::unique_ptr<DeepFeatureProvider> make_provider(const DeepConfig& cfg, const PreprocessConfig& preprocess) {
  if (cfg.backend == DeepBackend::precomputed) {
    return std::make_unique<PrecomputedProvider>(cfg.feature_path, cfg.width);
  }
  const auto meta = parse_onnx_metadata(onnx_metadata_path(cfg.model_path));
  for (int c = 0; c < 3; ++c) {
    if (std::abs(meta.means_bgr[c] - preprocess.means_bgr[c]) > 1e-6) {
      fail(ErrorKind::config, "ONNX model was exported with different centering means than the run config");
    }
  }
  return make_onnx_provider(cfg.model_path, cfg.width);
}

RawFeatures extract_features(const LabeledDataset& ds, const RunConfig& cfg,
                             const DeepFeatureProvider* provider, const ExtractOptions& opts) {
  if (cfg.deep && provider == nullptr) {
    fail(ErrorKind::config, "deep features enabled but no deep-feature provider available");
  }
  const std::size_t n = ds.size();
  RawFeatures out;
  out.groups = canonical_groups(cfg.groups);
  const std::size_t hand_width = groups_width(out.groups);
  out.handcrafted = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(hand_width));
  for (const auto& s : ds.samples) {
    out.ids.push_back(s.id);
    out.labels.push_back(s.label);
  }
  const bool want_deep = cfg.deep.has_value();
  if (want_deep) {
    if (provider->width() != cfg.deep->width) {
      fail(ErrorKind::provider, "deep provider width " + std::to_string(provider->width()) +
                                    " does not match configured width " + std::to_string(cfg.deep->width));
    }
    out.deep.emplace();
    out.deep->ids = out.ids;
    out.deep->values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(provider->width()));
  }

  // Handcrafted rows may come from an RFF1 cache written by `extract`.
  std::optional<RffFile> cache;
  std::map<std::string, std::size_t> cache_index;
  if (!cfg.paths.handcrafted_features.empty() && std::filesystem::exists(cfg.paths.handcrafted_features) &&
      hand_width > 0) {
    cache.emplace(read_rff(cfg.paths.handcrafted_features));
    if (cache->header().group_layout != handcrafted_layout(out.groups)) {
      fail(ErrorKind::config, "feature cache " + cfg.paths.handcrafted_features.string() +
                                  " was extracted with different feature groups");
    }
    for (std::size_t i = 0; i < cache->header().ids.size(); ++i) cache_index[cache->header().ids[i]] = i;
  }

  const bool need_hand_images = hand_width > 0 && !cache;
  const bool need_tensor = want_deep && provider->needs_tensor();
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;

  parallel_for(n, opts.jobs, [&](std::size_t i) {
    const Sample& s = ds.samples[i];
    const auto row = static_cast<Eigen::Index>(i);
    try {
      std::optional<PreprocessedImage> pre;
      if (need_hand_images || need_tensor) pre = preprocess_image(s.path, cfg.preprocess);
      if (hand_width > 0) {
        std::vector<double> hand;
        if (cache) {
          const auto it = cache_index.find(s.id);
          if (it == cache_index.end()) fail(ErrorKind::lookup, "id not present in feature cache");
          hand = cache->row_f64(it->second);
        } else {
          hand = extract_groups(pre->gray, out.groups);
        }
        out.handcrafted.row(row) = Eigen::Map<const Eigen::RowVectorXd>(hand.data(), static_cast<Eigen::Index>(hand.size()));
      }
      if (want_deep) {
        const DeepSample ds_sample{s.id, pre ? &pre->tensor : nullptr};
        const auto deep = provider->features(ds_sample);
        if (deep.size() != provider->width()) fail(ErrorKind::provider, "deep row has wrong width");
        for (float v : deep) {
          if (!std::isfinite(v)) fail(ErrorKind::provider, "non-finite deep feature");
        }
        out.deep->values.row(row) = Eigen::Map<const Eigen::RowVectorXf>(deep.data(), static_cast<Eigen::Index>(deep.size()));
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "sample '" + s.id + "' (" + s.path.string() + "): " + e.what());
    }
    const std::size_t finished = ++done;
    if (opts.progress) {
      std::lock_guard lock(progress_mutex);
      opts.progress(finished, n);
    }
  });
  return out;
}

FeatureTable fuse(const RawFeatures& raw, const KpcaModel* kpca) {
  FeatureTable t;
  t.ids = raw.ids;
  t.groups = handcrafted_layout(raw.groups);
  if (raw.deep && kpca == nullptr) fail(ErrorKind::argument, "fuse: deep features present but no kpca model");
  if (!raw.deep && kpca != nullptr) fail(ErrorKind::argument, "fuse: kpca model given without deep features");
  const Eigen::Index hand = raw.handcrafted.cols();
  if (!raw.deep) {
    t.values = raw.handcrafted;
    return t;
  }
  const RowMatrix reduced = kpca_transform(*kpca, raw.deep->values);
  t.values.resize(raw.handcrafted.rows(), hand + reduced.cols());
  t.values.leftCols(hand) = raw.handcrafted;
  t.values.rightCols(reduced.cols()) = reduced;
  t.groups.push_back({"deep_kpca", static_cast<std::size_t>(hand), static_cast<std::size_t>(reduced.cols())});
  return t;
}

FeatureTable build_feature_table(const LabeledDataset& ds, const RunConfig& cfg,
                                 const DeepFeatureProvider* provider, const KpcaModel* kpca,
                                 const ExtractOptions& opts) {
  return fuse(extract_features(ds, cfg, provider, opts), kpca);
}

std::size_t PipelineModel::fused_width() const noexcept {
  return groups_width(groups) + (kpca ? kpca->components() : 0);
}

TrainResult train_pipeline(const RawFeatures& train, const RunConfig& cfg, FitObserver* observer) {
  cfg.validate();
  if (train.size() < 2) fail(ErrorKind::argument, "train_pipeline: need at least 2 training rows");
  TrainResult result;
  PipelineModel& model = result.model;
  model.name = cfg.name;
  model.preprocess = cfg.preprocess;
  model.groups = canonical_groups(cfg.groups);
  model.deep = cfg.deep;
  model.kpca_config = cfg.kpca;
  model.split = cfg.split;
  if (train.groups != model.groups) fail(ErrorKind::argument, "train_pipeline: feature groups differ from config");

  RowMatrix fused;
  if (cfg.deep) {
    if (!train.deep) fail(ErrorKind::argument, "train_pipeline: config enables deep features but none were extracted");
    if (observer) observer->on_fit("kpca_fit", train.ids);
    KpcaFit kfit = kpca_fit(train.deep->values, cfg.kpca.k, cfg.kpca.kernel);
    result.requested_k = kfit.requested;
    result.effective_k = kfit.model.components();
    if (kfit.clamped) {
      result.warnings.push_back("kpca: requested " + std::to_string(kfit.requested) +
                                " components, effective " + std::to_string(result.effective_k) +
                                " (rank bound n_train - 1 = " + std::to_string(train.size() - 1) + ")");
    }
    fused.resize(train.handcrafted.rows(), train.handcrafted.cols() + kfit.scores.cols());
    fused.leftCols(train.handcrafted.cols()) = train.handcrafted;
    fused.rightCols(kfit.scores.cols()) = kfit.scores;
    model.kpca = std::move(kfit.model);
  } else {
    fused = train.handcrafted;
  }

  if (observer) observer->on_fit("standardize_fit", train.ids);
  model.standardizer = standardize_fit(fused);
  const RowMatrix scaled = standardize_apply(model.standardizer, fused);

  if (observer) observer->on_fit("svm_fit", train.ids);
  SvmFit sfit = svm_fit(scaled, train.labels, cfg.svm);
  if (!sfit.converged()) {
    result.warnings.push_back("svm: did not reach the duality-gap tolerance within max_iter epochs");
  }
  model.svm = std::move(sfit.model);
  result.svm_traces = std::move(sfit.traces);

  const auto predicted = svm_predict(model.svm, scaled);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == train.labels[i];
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());

  model.provenance.split_seed = cfg.split.seed;
  model.provenance.svm_seed = cfg.svm.seed;
  model.provenance.n_train = train.size();
  model.provenance.manifest = cfg.paths.manifest.string();
  if (cfg.record_timestamp) model.provenance.created = utc_timestamp();
  return result;
}

std::vector<Prediction> predict_features(const PipelineModel& model, const RawFeatures& features) {
  if (features.groups != model.groups) fail(ErrorKind::argument, "predict: feature groups differ from model");
  const FeatureTable table = fuse(features, model.kpca ? &*model.kpca : nullptr);
  const RowMatrix scaled = standardize_apply(model.standardizer, table.values);
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(scaled.rows()));
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
    const Eigen::VectorXd row = scaled.row(i).transpose();
    Prediction p;
    p.scores = svm_decision(model.svm, std::span(row.data(), static_cast<std::size_t>(row.size())));
    p.label = argmax_label(p.scores);
    out.push_back(p);
  }
  return out;
}

Prediction predict(const PipelineModel& model, const std::filesystem::path& image,
                   const DeepFeatureProvider* provider, const std::string& id) {
  const PreprocessedImage pre = preprocess_image(image, model.preprocess);
  RawFeatures f;
  f.groups = model.groups;
  f.ids = {id.empty() ? image.string() : id};
  f.labels = {ClassLabel::covid};
  const auto hand = extract_groups(pre.gray, model.groups);
  f.handcrafted = Eigen::Map<const RowMatrix>(hand.data(), 1, static_cast<Eigen::Index>(hand.size()));
  if (model.deep) {
    if (provider == nullptr) fail(ErrorKind::config, "model uses deep features but no provider is available");
    std::string key = f.ids[0];
    if (const auto* pc = dynamic_cast<const PrecomputedProvider*>(provider); pc && id.empty()) {
      const std::string candidates[] = {
          key, (image.parent_path().filename() / image.filename()).generic_string(), image.stem().string()};
      for (const auto& c : candidates) {
        if (pc->contains(c)) {
          key = c;
          break;
        }
      }
    }
    const auto deep = provider->features({key, &pre.tensor});
    f.deep.emplace();
    f.deep->ids = {key};
    f.deep->values = Eigen::Map<const FloatRowMatrix>(deep.data(), 1, static_cast<Eigen::Index>(deep.size()));
  }
  return predict_features(model, f).front();
}

EvalReport evaluate(const PipelineModel& model, const RawFeatures& test) {
  if (test.size() == 0) fail(ErrorKind::argument, "evaluate: empty test set");
  const auto predictions = predict_features(model, test);
  std::vector<ClassLabel> predicted;
  predicted.reserve(predictions.size());
  for (const auto& p : predictions) predicted.push_back(p.label);
  return make_report(model.name, confusion_matrix(test.labels, predicted));
}

ExperimentResult run_experiment(const LabeledDataset& ds, const RunConfig& cfg,
                                const DeepFeatureProvider* provider, const ExtractOptions& opts,
                                FitObserver* observer) {
  ExperimentResult result;
  result.split = split(ds, cfg.split);
  const RawFeatures all = extract_features(ds, cfg, provider, opts);

  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < all.ids.size(); ++i) row_of[all.ids[i]] = i;
  auto rows_for = [&](const LabeledDataset& part) {
    std::vector<std::size_t> rows;
    for (const auto& s : part.samples) rows.push_back(row_of.at(s.id));
    return rows;
  };
  const auto train_rows = rows_for(result.split.train);
  const auto test_rows = rows_for(result.split.test);

  result.train = train_pipeline(all.subset(train_rows), cfg, observer);
  result.train.model.provenance.dataset_hash = dataset_hash(ds);
  result.report = evaluate(result.train.model, all.subset(test_rows));
  return result;
}

}  // namespace radfuse
