#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvtc {

/// Bad shapes, bad modes, out-of-domain parameters.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A malformed or invalid input record. `record()` is the 1-based record
/// (or line) number, 0 when unknown.
class IngestError : public std::runtime_error {
 public:
  IngestError(std::size_t record, const std::string& what)
      : std::runtime_error(record ? "record " + std::to_string(record) + ": " + what : what),
        record_(record) {}
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

class UnsupportedShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite gradient or objective inside an iterative solver.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Out-of-order arrivals in an event stream.
class StreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mvtc
