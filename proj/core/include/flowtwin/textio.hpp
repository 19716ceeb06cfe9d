#pragma once

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace flowtwin {

/// Parse failure with enough context to name the offending record and field.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Floats in generated artifacts carry 9 significant digits.
inline std::string format_sig9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// Full-precision form used where exact round-trips matter (checkpoints).
inline std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Escapes a string for embedding in a JSON document.
std::string json_escape(const std::string& s);

}  // namespace flowtwin
