#pragma once

// RFF1 feature files:
//   "RFF1" | u32 LE header length | UTF-8 JSON header | row-major LE payload | u32 LE CRC32
// The CRC covers every byte before it. Header keys: version, n_samples, n_features,
// dtype ("f32" | "f64"), ids, extractor, group_layout [{name, offset, length}].

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace radfuse {

enum class RffDtype { f32, f64 };

struct ColumnGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const ColumnGroup&, const ColumnGroup&) = default;
};

struct RffHeader {
  int version = 1;
  std::size_t n_samples = 0;
  std::size_t n_features = 0;
  RffDtype dtype = RffDtype::f64;
  std::vector<std::string> ids;
  std::string extractor;
  std::vector<ColumnGroup> group_layout;
};

class RffFile {
public:
  RffFile(RffHeader header, std::vector<std::uint8_t> payload);

  const RffHeader& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return header_.n_samples; }
  std::size_t cols() const noexcept { return header_.n_features; }

  double value(std::size_t row, std::size_t col) const;
  void copy_row(std::size_t row, std::span<double> out) const;
  void copy_row(std::size_t row, std::span<float> out) const;
  std::vector<double> row_f64(std::size_t row) const;
  std::vector<float> row_f32(std::size_t row) const;

private:
  RffHeader header_;
  std::vector<std::uint8_t> payload_;
};

inline constexpr std::uint32_t kRffVersion = 1;

/// Values are row-major n_samples x n_features; converted to header.dtype on write.
/// The file is written to a temporary sibling and renamed into place.
void write_rff(const std::filesystem::path& path, const RffHeader& header,
               std::span<const double> values);
void write_rff(const std::filesystem::path& path, const RffHeader& header,
               std::span<const float> values);

/// Throws Error(format) on bad magic/structure, Error(checksum) on CRC mismatch,
/// Error(version) on an unknown version.
RffFile read_rff(const std::filesystem::path& path);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace radfuse
