#pragma once

#include <stdexcept>
#include <string>

namespace towerlab {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A tower point carries a symbol the spec does not know, or sits above its roof.
class InvalidPoint : public Error {
  public:
    using Error::Error;
};

/// Out-of-range or inconsistent parameter.
class ParameterError : public Error {
  public:
    using Error::Error;
};

/// Malformed text input (spec tables, config files, CSV).
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    explicit ParseError(const std::string& what) : Error(what) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_ = 0;
};

/// Cylinder basis would exceed the configured cell cap.
class SizeError : public Error {
  public:
    SizeError(const std::string& what, int suggested_depth)
        : Error(what), suggested_depth_(suggested_depth)
    {
    }

    int suggested_depth() const noexcept { return suggested_depth_; }

  private:
    int suggested_depth_;
};

/// Coboundary series terms escaped the geometric envelope of the stable fibre.
class NonContractingFiber : public Error {
  public:
    using Error::Error;
};

/// Long-orbit average of the inverse cu-derivative is not negative.
class NotExpanding : public Error {
  public:
    using Error::Error;
};

/// Derivative vanishes or is undefined at a sample point.
class SingularPoint : public Error {
  public:
    using Error::Error;
};

} // namespace towerlab
