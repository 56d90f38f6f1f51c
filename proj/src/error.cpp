#include "ganblend/error.hpp"

namespace ganblend {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::Io: return "io";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::UnsupportedVersion: return "unsupported version";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::Format: return "format";
    case ErrorKind::Manifest: return "manifest";
    case ErrorKind::Grammar: return "grammar";
    case ErrorKind::Schedule: return "schedule";
    case ErrorKind::Config: return "config";
    case ErrorKind::NotFound: return "not found";
  }
  return "unknown";
}

}  // namespace ganblend
