#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ganblend {

enum class ErrorKind {
  Shape,
  InvalidArgument,
  NonFinite,
  Io,
  BadMagic,
  UnsupportedVersion,
  Truncated,
  Format,
  Manifest,
  Grammar,
  Schedule,
  Config,
  NotFound,
};

std::string_view to_string(ErrorKind kind);

// Every failure in the toolkit surfaces as this exception; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ganblend
