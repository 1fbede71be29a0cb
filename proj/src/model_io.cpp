#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "radfuse/common.hpp"
#include "radfuse/pipeline.hpp"

namespace radfuse {
namespace {

using nlohmann::json;

constexpr std::string_view kFormatName = "radfuse-model";
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    std::uint32_t chunk = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < len) chunk |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < len) chunk |= data[i + 2];
    out.push_back(kAlphabet[(chunk >> 18) & 63]);
    out.push_back(kAlphabet[(chunk >> 12) & 63]);
    out.push_back(i + 1 < len ? kAlphabet[(chunk >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? kAlphabet[chunk & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) fail(ErrorKind::format, "model file: malformed base64 block");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t chunk = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        ++pad;
        chunk <<= 6;
        continue;
      }
      const int v = value(c);
      if (v < 0 || pad > 0) fail(ErrorKind::format, "model file: malformed base64 block");
      chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(chunk >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(chunk >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(chunk));
  }
  return out;
}

static_assert(std::endian::native == std::endian::little);

// Dense matrices travel as base64 of little-endian binary64, row-major.
template <typename Derived>
json encode_matrix(const Eigen::MatrixBase<Derived>& m) {
  const RowMatrix rm = m.template cast<double>();
  return {{"rows", rm.rows()},
          {"cols", rm.cols()},
          {"dtype", "f64"},
          {"data", base64_encode(reinterpret_cast<const std::uint8_t*>(rm.data()),
                                 static_cast<std::size_t>(rm.size()) * sizeof(double))}};
}

RowMatrix decode_matrix(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (j.at("dtype").get<std::string>() != "f64") fail(ErrorKind::format, "model file: unsupported matrix dtype");
  const auto bytes = base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double)) {
    fail(ErrorKind::format, "model file: matrix payload size mismatch");
  }
  RowMatrix m(rows, cols);
  if (!bytes.empty()) std::memcpy(m.data(), bytes.data(), bytes.size());
  return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json kpca_json(const KpcaModel& k) {
  json j = {{"kernel", to_string(k.kernel.kind)},
            {"gamma", k.kernel.gamma},
            {"input_width", k.input_width},
            {"eigenvalues", vector_json(k.eigenvalues)}};
  if (k.kernel.kind == KernelKind::linear) {
    j["mean"] = encode_matrix(k.mean.transpose());
    j["projection"] = encode_matrix(k.projection);
  } else {
    j["references"] = encode_matrix(k.references);
    j["kernel_col_means"] = vector_json(k.kernel_col_means);
    j["kernel_grand_mean"] = k.kernel_grand_mean;
    j["coefficients"] = encode_matrix(k.coefficients);
  }
  return j;
}

KpcaModel kpca_from(const json& j) {
  KpcaModel k;
  const auto kernel = j.at("kernel").get<std::string>();
  k.kernel.kind = kernel == "rbf" ? KernelKind::rbf : KernelKind::linear;
  k.kernel.gamma = j.at("gamma").get<double>();
  k.input_width = j.at("input_width").get<std::size_t>();
  k.eigenvalues = vector_from(j.at("eigenvalues"));
  if (k.kernel.kind == KernelKind::linear) {
    k.mean = decode_matrix(j.at("mean")).row(0).transpose();
    k.projection = decode_matrix(j.at("projection"));
  } else {
    k.references = decode_matrix(j.at("references"));
    k.kernel_col_means = vector_from(j.at("kernel_col_means"));
    k.kernel_grand_mean = j.at("kernel_grand_mean").get<double>();
    k.coefficients = decode_matrix(j.at("coefficients"));
  }
  return k;
}

json payload_json(const PipelineModel& m) {
  json groups = json::array();
  for (FeatureGroup g : m.groups) groups.push_back(to_string(g));
  json weights = json::array();
  for (const auto& w : m.svm.weights) weights.push_back(vector_json(w));
  json provenance = {{"split_seed", m.provenance.split_seed},
                     {"svm_seed", m.provenance.svm_seed},
                     {"dataset_hash", m.provenance.dataset_hash},
                     {"manifest", m.provenance.manifest},
                     {"n_train", m.provenance.n_train},
                     {"created", m.provenance.created ? json(*m.provenance.created) : json(nullptr)}};
  return {
      {"name", m.name},
      {"preprocess", preprocess_to_json(m.preprocess)},
      {"groups", groups},
      {"deep", m.deep ? deep_to_json(*m.deep) : json(nullptr)},
      {"kpca_config",
       {{"k", m.kpca_config.k}, {"kernel", to_string(m.kpca_config.kernel.kind)}, {"gamma", m.kpca_config.kernel.gamma}}},
      {"kpca", m.kpca ? kpca_json(*m.kpca) : json(nullptr)},
      {"split",
       {{"train_fraction", m.split.train_fraction}, {"seed", m.split.seed}, {"stratified", m.split.stratified}}},
      {"standardizer", {{"mean", vector_json(m.standardizer.mean)}, {"scale", vector_json(m.standardizer.scale)}}},
      {"svm",
       {{"classes", {"covid", "normal", "pneumonia"}},
        {"C", m.svm.C},
        {"weights", weights},
        {"bias", m.svm.bias},
        {"bias_mode", "augmented_regularized"}}},
      {"provenance", provenance},
  };
}

PipelineModel model_from(const json& p) {
  PipelineModel m;
  m.name = p.at("name").get<std::string>();
  m.preprocess = preprocess_from_json(p.at("preprocess"));
  for (const auto& g : p.at("groups")) m.groups.push_back(parse_group(g.get<std::string>()));
  if (!p.at("deep").is_null()) m.deep = deep_from_json(p.at("deep"));
  const auto& kc = p.at("kpca_config");
  m.kpca_config.k = kc.at("k").get<int>();
  m.kpca_config.kernel.kind = kc.at("kernel").get<std::string>() == "rbf" ? KernelKind::rbf : KernelKind::linear;
  m.kpca_config.kernel.gamma = kc.at("gamma").get<double>();
  if (!p.at("kpca").is_null()) m.kpca = kpca_from(p.at("kpca"));
  const auto& sp = p.at("split");
  m.split.train_fraction = sp.at("train_fraction").get<double>();
  m.split.seed = sp.at("seed").get<std::uint64_t>();
  m.split.stratified = sp.at("stratified").get<bool>();
  m.standardizer.mean = vector_from(p.at("standardizer").at("mean"));
  m.standardizer.scale = vector_from(p.at("standardizer").at("scale"));
  const auto& svm = p.at("svm");
  m.svm.C = svm.at("C").get<double>();
  const auto& weights = svm.at("weights");
  if (weights.size() != kNumClasses) fail(ErrorKind::format, "model file: expected 3 SVM machines");
  for (int c = 0; c < kNumClasses; ++c) m.svm.weights[c] = vector_from(weights.at(c));
  m.svm.bias = svm.at("bias").get<std::array<double, kNumClasses>>();
  const auto& pr = p.at("provenance");
  m.provenance.split_seed = pr.at("split_seed").get<std::uint64_t>();
  m.provenance.svm_seed = pr.at("svm_seed").get<std::uint64_t>();
  m.provenance.dataset_hash = pr.at("dataset_hash").get<std::string>();
  m.provenance.manifest = pr.at("manifest").get<std::string>();
  m.provenance.n_train = pr.at("n_train").get<std::size_t>();
  if (!pr.at("created").is_null()) m.provenance.created = pr.at("created").get<std::string>();

  const std::size_t width = m.fused_width();
  if (m.standardizer.width() != width || m.svm.width() != width) {
    fail(ErrorKind::format, "model file: component widths are inconsistent");
  }
  for (const auto& w : m.svm.weights) {
    if (static_cast<std::size_t>(w.size()) != width) fail(ErrorKind::format, "model file: SVM width mismatch");
  }
  return m;
}

std::string checksum_hex(const std::string& text) {
  const auto crc = crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

}  // namespace

std::string serialize_model(const PipelineModel& model) {
  const json payload = payload_json(model);
  const json envelope = {{"format", kFormatName},
                         {"version", kModelFormatVersion},
                         {"checksum", checksum_hex(payload.dump())},
                         {"payload", payload}};
  return envelope.dump(1) + "\n";
}

PipelineModel deserialize_model(const std::string& text) {
  json envelope;
  try {
    envelope = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!envelope.is_object() || envelope.value("format", "") != kFormatName) {
      fail(ErrorKind::format, "not a radfuse model file");
    }
    const int version = envelope.at("version").get<int>();
    if (version != kModelFormatVersion) {
      fail(ErrorKind::version, "model format version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(kModelFormatVersion) + ")");
    }
    const json& payload = envelope.at("payload");
    if (checksum_hex(payload.dump()) != envelope.at("checksum").get<std::string>()) {
      fail(ErrorKind::checksum, "model file checksum mismatch");
    }
    return model_from(payload);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("model file: ") + e.what());
  }
}

void save_model(const PipelineModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_model(model);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::data, "cannot write model file: " + tmp.string());
    out << text;
    if (!out) fail(ErrorKind::data, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

PipelineModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot open model file: " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_model(text);
}

}  // namespace radfuse
