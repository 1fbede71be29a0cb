#include "radfuse/common.hpp"

#include <algorithm>
#include <cctype>

namespace radfuse {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::config: return "config";
    case ErrorKind::decode: return "decode";
    case ErrorKind::format: return "format";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::provider: return "provider";
    case ErrorKind::data: return "data";
    case ErrorKind::version: return "version";
    case ErrorKind::checksum: return "checksum";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument:
    case ErrorKind::config:
      return 2;
    case ErrorKind::internal:
      return 4;
    default:
      return 3;
  }
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

std::string_view to_string(ClassLabel label) noexcept {
  switch (label) {
    case ClassLabel::covid: return "covid";
    case ClassLabel::normal: return "normal";
    case ClassLabel::pneumonia: return "pneumonia";
  }
  return "covid";
}

std::optional<ClassLabel> parse_label(std::string_view text) {
  std::string lower;
  lower.reserve(text.size());
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) {
      lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (lower == "covid" || lower == "covid-19" || lower == "covid19" || lower == "covid_19") {
    return ClassLabel::covid;
  }
  if (lower == "normal") return ClassLabel::normal;
  if (lower == "pneumonia") return ClassLabel::pneumonia;
  return std::nullopt;
}

}  // namespace radfuse
