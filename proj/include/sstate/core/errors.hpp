#pragma once

#include <stdexcept>
#include <string>

namespace sstate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Innovation covariance was singular (or too ill-conditioned) at `time_step`.
class SingularCovarianceError : public Error {
 public:
  SingularCovarianceError(long time_step, const std::string& detail)
      : Error("singular innovation covariance at time step " + std::to_string(time_step) + ": " +
              detail),
        time_step_(time_step) {}

  long time_step() const noexcept { return time_step_; }

 private:
  long time_step_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data; `line` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Download failed and no cached copy could stand in.
class NetworkError : public Error {
 public:
  using Error::Error;
};

}  // namespace sstate
