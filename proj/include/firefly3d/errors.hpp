#pragma once

#include <stdexcept>
#include <string>

namespace firefly {

// Process exit codes used by the CLI and mapped from exception types.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

// Invalid or inconsistent configuration (bad JSON, nonsensical values).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(kExitConfig, what) {}
};

// Malformed or missing input data (parse failures, absent files, empty streams).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(kExitData, what) {}
};

// Numerical failure (non-finite cost, degenerate systems that should not occur).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(kExitNumerical, what) {}
};

}  // namespace firefly
