#pragma once

#include <stdexcept>
#include <string>

namespace thc {

enum class ErrorKind {
  Syntax,             // lexical or grammatical error
  Unsupported,        // valid OpenCL-C outside the subset
  Semantic,           // undeclared identifier, bad types, ...
  Transform,          // transform precondition violated
  Precondition,       // runtime obligation or launch precondition violated
  OutOfBounds,
  DataRace,
  BarrierDivergence,
  DivisionByZero,
  InvalidSpec,        // microbenchmark parameters
  Io,
};

const char* to_string(ErrorKind kind);

/// All library failures. Source diagnostics carry a 1-based line/column.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, int line = 0, int column = 0);

  ErrorKind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

  /// `file:line:col: message`, or `file: message` without a location.
  std::string diagnostic(const std::string& file) const;

 private:
  ErrorKind kind_;
  int line_;
  int column_;
};

}  // namespace thc
