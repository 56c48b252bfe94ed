#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polnet {

/// Error classes shared by every module. The CLI maps them onto exit codes
/// and prints the class name so scripts can branch on it.
enum class Errc {
  kUnknownNode,
  kEndpointMismatch,
  kSelfLoop,
  kFrozen,
  kVersionMismatch,
  kTruncated,
  kChecksum,
  kFormat,
  kIo,
  kParameter,
  kSplit,
  kDivergence,
  kMode,
  kEmptySegment,
  kRankDeficient,
  kNonConvergence,
  kValidation,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace polnet
