#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fracmap {

enum class ErrorKind {
  Domain,
  Pole,
  TubularViolation,
  Singularity,
  UnsupportedExponent,
  IllConditionedDegree,
  GlueFailure,
  DegenerateDirection,
  Resolution,
  Precondition,
  Unsupported,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Pole: return "pole";
    case ErrorKind::TubularViolation: return "tubular-violation";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::UnsupportedExponent: return "unsupported-exponent";
    case ErrorKind::IllConditionedDegree: return "ill-conditioned-degree";
    case ErrorKind::GlueFailure: return "glue-failure";
    case ErrorKind::DegenerateDirection: return "degenerate-direction";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Library exception. `node()` is set when the failure is attributable to one
/// mesh node (tubular violations, glue failures).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<std::size_t> node = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), node_(node) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> node() const noexcept { return node_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> node_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace fracmap
