#pragma once

#include <stdexcept>
#include <string>

namespace idem {

/// Error classes. The CLI maps each class to a distinct exit code.
enum class ErrorKind {
  format,            // malformed file contents
  invalid_argument,  // precondition violated by caller-supplied values
  io,                // file could not be opened / written
  empty_comparison,  // comparison set has no qualifying pairs
  resolution,        // requested rate is below what the pair count can resolve
  divergence,        // non-finite value during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::io: return "io";
    case ErrorKind::empty_comparison: return "empty_comparison";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::divergence: return "divergence";
  }
  return "unknown";
}

}  // namespace idem
