#pragma once

#include <stdexcept>
#include <string>

namespace qprobe {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorKind {
  InvalidArgument,
  Config,
  Invariant,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) { return Error(ErrorKind::InvalidArgument, what); }
inline Error invariant_breach(const std::string& what) { return Error(ErrorKind::Invariant, what); }
inline Error io_error(const std::string& what) { return Error(ErrorKind::Io, what); }

/// "origin:line: what"; line 0 means the problem is not tied to one line.
inline Error config_error(const std::string& origin, int line, const std::string& what) {
  return Error(ErrorKind::Config, line > 0 ? origin + ":" + std::to_string(line) + ": " + what : origin + ": " + what);
}

}  // namespace qprobe
