#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace mlcore {

enum class ErrorKind {
  InvalidLabels,
  InvalidFoldCount,
  InvalidSplit,
  ShapeMismatch,
  InvalidParameter,
  InvalidData,
  NotConverged,
  SingularCovariance,
  UnsupportedKernel,
  InvalidLists,
  InvalidLength,
  InvalidCoefficients,
  InvalidWindow,
  ParseError,
  FormatError,
};

inline constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidLabels: return "InvalidLabels";
    case ErrorKind::InvalidFoldCount: return "InvalidFoldCount";
    case ErrorKind::InvalidSplit: return "InvalidSplit";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InvalidData: return "InvalidData";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::UnsupportedKernel: return "UnsupportedKernel";
    case ErrorKind::InvalidLists: return "InvalidLists";
    case ErrorKind::InvalidLength: return "InvalidLength";
    case ErrorKind::InvalidCoefficients: return "InvalidCoefficients";
    case ErrorKind::InvalidWindow: return "InvalidWindow";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::FormatError: return "FormatError";
  }
  return "Unknown";
}

/// Base of every exception thrown by the library. The kind is the stable,
/// machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define MLCORE_DEFINE_ERROR(Name)                                                    \
  class Name : public Error {                                                        \
   public:                                                                           \
    explicit Name(const std::string& message) : Error(ErrorKind::Name, message) {}  \
  };

MLCORE_DEFINE_ERROR(InvalidLabels)
MLCORE_DEFINE_ERROR(InvalidFoldCount)
MLCORE_DEFINE_ERROR(InvalidSplit)
MLCORE_DEFINE_ERROR(ShapeMismatch)
MLCORE_DEFINE_ERROR(InvalidParameter)
MLCORE_DEFINE_ERROR(InvalidData)
MLCORE_DEFINE_ERROR(SingularCovariance)
MLCORE_DEFINE_ERROR(UnsupportedKernel)
MLCORE_DEFINE_ERROR(InvalidLists)
MLCORE_DEFINE_ERROR(InvalidLength)
MLCORE_DEFINE_ERROR(InvalidCoefficients)
MLCORE_DEFINE_ERROR(InvalidWindow)
MLCORE_DEFINE_ERROR(FormatError)

#undef MLCORE_DEFINE_ERROR

class NotConverged : public Error {
 public:
  explicit NotConverged(const std::string& message) : Error(ErrorKind::NotConverged, message) {}
};

/// NotConverged carrying the last iterate, so callers can still inspect or use it.
template <typename Iterate>
class NotConvergedWith : public NotConverged {
 public:
  NotConvergedWith(const std::string& message, Iterate last)
      : NotConverged(message), last_(std::move(last)) {}

  const Iterate& last_iterate() const noexcept { return last_; }

 private:
  Iterate last_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column = 0)
      : Error(ErrorKind::ParseError, message), line_(line), column_(column) {}

  /// 1-based line in the source; 0 when not applicable.
  std::size_t line() const noexcept { return line_; }
  /// 1-based column; 0 when the whole line is at fault.
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Re-raise an error of the same kind with extra context prepended.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string what = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::InvalidLabels: throw InvalidLabels(what);
    case ErrorKind::ShapeMismatch: throw ShapeMismatch(what);
    case ErrorKind::InvalidParameter: throw InvalidParameter(what);
    case ErrorKind::SingularCovariance: throw SingularCovariance(what);
    case ErrorKind::NotConverged: throw NotConverged(what);
    case ErrorKind::UnsupportedKernel: throw UnsupportedKernel(what);
    default: throw Error(e.kind(), what);
  }
}

}  // namespace mlcore
