#pragma once

#include <stdexcept>
#include <string>

namespace fun {

// Error categories double as CLI exit codes.
enum class ErrorKind {
  usage = 2,
  io = 3,
  dimension = 4,
  divergence = 5,
  config = 6,
  spec = 7,
  degenerate_scale = 8,
  dataset = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return "usage error";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::spec: return "spec error";
    case ErrorKind::degenerate_scale: return "degenerate scale";
    case ErrorKind::dataset: return "dataset error";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace fun
