#pragma once

#include <stdexcept>
#include <string>

namespace revrir {

enum class ErrorKind {
  Validation,
  Geometry,
  Sampling,
  Lookup,
  Format,
  Config,
  State,
  Data,
  Feature,
  Io,
  Numeric,
};

const char* to_string(ErrorKind kind);

/// Process exit code for a failure of this kind: 2 validation-like, 3 data-like, 4 numeric.
int exit_code(ErrorKind kind);

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

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace revrir
