#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace negfactor {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A required CSV column or JSON field is missing or malformed.
class SchemaError : public Error {
  public:
    using Error::Error;
};

// A single input row is invalid. `line()` is 1-based and counts the header.
class RowError : public Error {
  public:
    RowError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class IndexError : public Error {
  public:
    using Error::Error;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

class CapacityError : public Error {
  public:
    using Error::Error;
};

class DomainError : public Error {
  public:
    using Error::Error;
};

class ConsistencyError : public Error {
  public:
    using Error::Error;
};

class NumericalError : public Error {
  public:
    using Error::Error;
};

class CoverageError : public Error {
  public:
    using Error::Error;
};

class PairingError : public Error {
  public:
    using Error::Error;
};

// Raised when the training loss stops being finite. Carries the losses seen
// up to (and including) the first non-finite one.
class FitError : public Error {
  public:
    FitError(const std::string& what, std::vector<double> trajectory)
        : Error(what), trajectory_(std::move(trajectory)) {}
    const std::vector<double>& trajectory() const noexcept { return trajectory_; }

  private:
    std::vector<double> trajectory_;
};

} // namespace negfactor
