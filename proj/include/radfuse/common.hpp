#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace radfuse {

enum class ErrorKind {
  argument,
  config,
  decode,
  format,
  lookup,
  provider,
  data,
  version,
  checksum,
  degenerate,
  internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Process exit code for an error category: 2 config/argument, 3 data, 4 internal.
int exit_code_for(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

enum class ClassLabel : std::uint8_t { covid = 0, normal = 1, pneumonia = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<ClassLabel, kNumClasses> kClassOrder{
    ClassLabel::covid, ClassLabel::normal, ClassLabel::pneumonia};

constexpr int class_index(ClassLabel label) noexcept { return static_cast<int>(label); }
constexpr ClassLabel class_from_index(int index) noexcept {
  return static_cast<ClassLabel>(index);
}

std::string_view to_string(ClassLabel label) noexcept;

/// Case-insensitive; accepts "covid", "covid-19", "covid19", "normal", "pneumonia".
std::optional<ClassLabel> parse_label(std::string_view text);

}  // namespace radfuse
