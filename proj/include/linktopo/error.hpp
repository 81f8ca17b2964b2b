#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace linktopo {

enum class ErrorKind {
  RejectedLink,
  MalformedCrawl,
  StoreFormat,
  TooFewLinks,
  SourceUnreachable,
  UndefinedTerm,
  OutOfSet,
  InsufficientData,
  DegenerateParameters,
  InvalidArgument,
  Precondition,
  NonConvergence,
  UndefinedCorrelation,
  NoCrossing,
  SpecError,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RejectedLink: return "rejected-link";
    case ErrorKind::MalformedCrawl: return "malformed-crawl";
    case ErrorKind::StoreFormat: return "store-format";
    case ErrorKind::TooFewLinks: return "too-few-links";
    case ErrorKind::SourceUnreachable: return "source-unreachable";
    case ErrorKind::UndefinedTerm: return "undefined-term";
    case ErrorKind::OutOfSet: return "out-of-set";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::DegenerateParameters: return "degenerate-parameters";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::UndefinedCorrelation: return "undefined-correlation";
    case ErrorKind::NoCrossing: return "no-crossing";
    case ErrorKind::SpecError: return "spec-error";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace linktopo
