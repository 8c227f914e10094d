#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xaiqa {

// Error classes are part of the CLI contract: the executable prints
// `error[<class>]: <message>` on a single line and maps each class to an
// exit code.
enum class ErrorKind {
  input,       // malformed or inconsistent input data
  validation,  // a precondition on arguments was violated
  config,      // configuration could not be loaded or validated
  transport,   // remote scorer / embedder failure
  numeric,     // non-finite values or non-convergence
  io,          // filesystem failure
  usage,       // bad command line
};

inline std::string_view kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input_error";
    case ErrorKind::validation: return "validation_error";
    case ErrorKind::config: return "config_error";
    case ErrorKind::transport: return "transport_error";
    case ErrorKind::numeric: return "numeric_error";
    case ErrorKind::io: return "io_error";
    case ErrorKind::usage: return "usage_error";
  }
  return "error";
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::config: return 3;
    case ErrorKind::input: return 4;
    case ErrorKind::validation: return 5;
    case ErrorKind::io: return 6;
    case ErrorKind::transport: return 7;
    case ErrorKind::numeric: return 8;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace xaiqa
