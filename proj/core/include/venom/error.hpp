#pragma once

#include <stdexcept>
#include <string>

namespace venom {

// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or structural mismatch; message names the offending tensor/layer.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite values or violated numeric preconditions during training.
struct NumericError : Error {
  using Error::Error;
};

// File format or filesystem failures.
struct IoError : Error {
  using Error::Error;
};

// Configuration file problems; carries the 1-based line number (0 = n/a).
struct ConfigError : Error {
  int line;
  explicit ConfigError(const std::string& msg, int line_no = 0)
      : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
};

// A pipeline stage failed; carries the stage name.
struct StageError : Error {
  std::string stage;
  StageError(std::string stage_name, const std::string& msg)
      : Error(stage_name + ": " + msg), stage(std::move(stage_name)) {}
};

}  // namespace venom
