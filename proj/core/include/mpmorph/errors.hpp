#pragma once

#include <stdexcept>
#include <string>

namespace mpmorph {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// |det(F + F_ctrl)| fell below the determinant floor.
class SingularDeformation : public Error {
 public:
  using Error::Error;
};

/// A particle's kernel support left the background grid.
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

class SizeMismatch : public Error {
 public:
  using Error::Error;
};

class LatticeMismatch : public Error {
 public:
  using Error::Error;
};

class NegativeMass : public Error {
 public:
  using Error::Error;
};

/// Bisection hit the halving cap without finding a non-increasing step.
class LineSearchFailed : public Error {
 public:
  using Error::Error;
};

class EmptyGeometry : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The optimizer produced a non-finite loss or gradient.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

/// A core-sim failure annotated with the timestep at which it happened.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, int timestep)
      : Error("timestep " + std::to_string(timestep) + ": " + what),
        timestep_(timestep) {}
  int timestep() const { return timestep_; }

 private:
  int timestep_;
};

}  // namespace mpmorph
