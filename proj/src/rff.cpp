#include "radfuse/rff.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <zlib.h>

#include "radfuse/common.hpp"

namespace radfuse {
namespace {

static_assert(std::endian::native == std::endian::little, "RFF1 I/O assumes a little-endian host");

constexpr char kMagic[4] = {'R', 'F', 'F', '1'};

std::size_t dtype_size(RffDtype d) { return d == RffDtype::f32 ? 4 : 8; }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

nlohmann::json header_json(const RffHeader& h) {
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& g : h.group_layout) {
    layout.push_back({{"name", g.name}, {"offset", g.offset}, {"length", g.length}});
  }
  return {{"version", h.version},
          {"n_samples", h.n_samples},
          {"n_features", h.n_features},
          {"dtype", h.dtype == RffDtype::f32 ? "f32" : "f64"},
          {"ids", h.ids},
          {"extractor", h.extractor},
          {"group_layout", layout}};
}

void validate_header(const RffHeader& h) {
  if (h.ids.size() != h.n_samples) {
    fail(ErrorKind::format, "RFF1 header: ids count does not match n_samples");
  }
  for (const auto& g : h.group_layout) {
    if (g.offset + g.length > h.n_features) {
      fail(ErrorKind::format, "RFF1 header: group '" + g.name + "' exceeds n_features");
    }
  }
}

template <typename T>
void write_impl(const std::filesystem::path& path, const RffHeader& header,
                std::span<const T> values) {
  validate_header(header);
  if (values.size() != header.n_samples * header.n_features) {
    fail(ErrorKind::argument, "write_rff: payload size does not match header shape");
  }
  const std::string json = header_json(header).dump();
  std::vector<std::uint8_t> bytes(kMagic, kMagic + 4);
  put_u32(bytes, static_cast<std::uint32_t>(json.size()));
  bytes.insert(bytes.end(), json.begin(), json.end());
  const std::size_t payload_at = bytes.size();
  bytes.resize(payload_at + values.size() * dtype_size(header.dtype));
  std::uint8_t* dst = bytes.data() + payload_at;
  for (T v : values) {
    if (header.dtype == RffDtype::f32) {
      const auto f = static_cast<float>(v);
      std::memcpy(dst, &f, 4);
      dst += 4;
    } else {
      const auto d = static_cast<double>(v);
      std::memcpy(dst, &d, 8);
      dst += 8;
    }
  }
  put_u32(bytes, crc32_of(bytes));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::data, "cannot open for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::data, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

RffFile::RffFile(RffHeader header, std::vector<std::uint8_t> payload)
    : header_(std::move(header)), payload_(std::move(payload)) {
  if (payload_.size() != header_.n_samples * header_.n_features * dtype_size(header_.dtype)) {
    fail(ErrorKind::format, "RFF1 payload size does not match header shape");
  }
}

double RffFile::value(std::size_t row, std::size_t col) const {
  const std::size_t idx = row * header_.n_features + col;
  if (header_.dtype == RffDtype::f32) {
    float f;
    std::memcpy(&f, payload_.data() + idx * 4, 4);
    return f;
  }
  double d;
  std::memcpy(&d, payload_.data() + idx * 8, 8);
  return d;
}

void RffFile::copy_row(std::size_t row, std::span<double> out) const {
  if (row >= rows() || out.size() != cols()) fail(ErrorKind::argument, "RffFile::copy_row: bad shape");
  for (std::size_t j = 0; j < cols(); ++j) out[j] = value(row, j);
}

void RffFile::copy_row(std::size_t row, std::span<float> out) const {
  if (row >= rows() || out.size() != cols()) fail(ErrorKind::argument, "RffFile::copy_row: bad shape");
  for (std::size_t j = 0; j < cols(); ++j) out[j] = static_cast<float>(value(row, j));
}

std::vector<double> RffFile::row_f64(std::size_t row) const {
  std::vector<double> out(cols());
  copy_row(row, std::span<double>(out));
  return out;
}

std::vector<float> RffFile::row_f32(std::size_t row) const {
  std::vector<float> out(cols());
  copy_row(row, std::span<float>(out));
  return out;
}

void write_rff(const std::filesystem::path& path, const RffHeader& header,
               std::span<const double> values) {
  write_impl(path, header, values);
}

void write_rff(const std::filesystem::path& path, const RffHeader& header,
               std::span<const float> values) {
  write_impl(path, header, values);
}

RffFile read_rff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot open feature file: " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::format, "not an RFF1 file: " + path.string());
  }
  const std::size_t body = bytes.size() - 4;
  const std::uint32_t stored = get_u32(bytes.data() + body);
  if (crc32_of(std::span(bytes.data(), body)) != stored) {
    fail(ErrorKind::checksum, "RFF1 checksum mismatch: " + path.string());
  }
  const std::uint32_t header_len = get_u32(bytes.data() + 4);
  if (8 + static_cast<std::size_t>(header_len) > body) {
    fail(ErrorKind::format, "RFF1 header length exceeds file size");
  }

  RffHeader h;
  try {
    const auto j = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
    h.version = j.at("version").get<int>();
    if (h.version != static_cast<int>(kRffVersion)) {
      fail(ErrorKind::version, "unsupported RFF1 version " + std::to_string(h.version));
    }
    h.n_samples = j.at("n_samples").get<std::size_t>();
    h.n_features = j.at("n_features").get<std::size_t>();
    const auto dtype = j.at("dtype").get<std::string>();
    if (dtype == "f32") {
      h.dtype = RffDtype::f32;
    } else if (dtype == "f64") {
      h.dtype = RffDtype::f64;
    } else {
      fail(ErrorKind::format, "RFF1 header: unknown dtype " + dtype);
    }
    h.ids = j.at("ids").get<std::vector<std::string>>();
    h.extractor = j.value("extractor", "");
    for (const auto& g : j.value("group_layout", nlohmann::json::array())) {
      h.group_layout.push_back(
          {g.at("name").get<std::string>(), g.at("offset").get<std::size_t>(), g.at("length").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("RFF1 header: ") + e.what());
  }
  validate_header(h);
  std::vector<std::uint8_t> payload(bytes.begin() + 8 + header_len, bytes.begin() + static_cast<std::ptrdiff_t>(body));
  return RffFile(std::move(h), std::move(payload));
}

}  // namespace radfuse
