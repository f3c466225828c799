#pragma once

#include <stdexcept>
#include <string>

namespace sqiv {

// Error categories map one-to-one onto CLI exit codes (see cli.hpp).
enum class ErrorKind {
  invalid_argument,
  identification,
  numerical,
  solver,
  io,
  parse,
  config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorKind::invalid_argument, w) {}
};
// Rank failure of G (local identification) or of an instrument block.
struct IdentificationError : Error {
  explicit IdentificationError(const std::string& w) : Error(ErrorKind::identification, w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorKind::numerical, w) {}
};
struct SolverError : Error {
  explicit SolverError(const std::string& w) : Error(ErrorKind::solver, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorKind::parse, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};

// Warnings go through a process-wide sink so the CLI and tests can silence them.
using WarningSink = void (*)(const std::string&);
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace sqiv
