#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dgi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vector whose norm is too small to normalize or retract through.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or generator parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset or checkpoint content. Carries the 1-based line number
/// when the input is line oriented (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Checkpoint and dataset disagree on dimensions or vocabulary.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace dgi
