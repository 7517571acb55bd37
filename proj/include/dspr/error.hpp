#pragma once

#include <stdexcept>
#include <string>

namespace dspr {

// Every failure the library reports derives from Error, so callers can
// catch the family and the CLI can map each class to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (header, magic, sample count, non-finite value).
class ParseError : public Error {
 public:
  enum class Kind { Header, Magic, SampleCount, NonFinite, Syntax };
  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range or otherwise invalid parameter value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Operands whose shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Precondition violated by the caller (e.g. denormalizing a degenerate grid).
class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

/// Loss became non-finite during optimization.
class DivergenceError : public Error {
 public:
  DivergenceError(int iteration, const std::string& what)
      : Error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class UndefinedSnrError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dspr
