#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace replay {

// Root of every error the library raises on purpose.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (k > n, empty input, ...).
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class SingularSystem : public Error {
  public:
    using Error::Error;
};

class AllSubsamplesSingular : public Error {
  public:
    using Error::Error;
};

class InvalidWeights : public Error {
  public:
    using Error::Error;
};

class CapExceeded : public Error {
  public:
    using Error::Error;
};

class TrajectoryTooShort : public Error {
  public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
  public:
    using Error::Error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

class EmptyFile : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

}  // namespace replay
