#pragma once

#include <stdexcept>
#include <string>

namespace flow {

enum class ErrorKind {
  InvalidInput,
  DegenerateInit,
  InsufficientData,
  Parse,
  SpecMismatch,
  ChannelUnusable,
  Schema,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this exception; `kind()` lets
// callers (the CLI in particular) map them onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace flow
