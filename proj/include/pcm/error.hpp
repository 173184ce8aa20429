#pragma once

#include <stdexcept>
#include <string>

namespace pcm {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3, kIo = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ExitCode::kValidation, what) {}
};

/// Geometric configuration that admits no unique answer (point on the camera
/// plane, collinear alignment input, gradient at a sphere center, ...).
class DegenerateConfiguration : public Error {
 public:
  explicit DegenerateConfiguration(const std::string& what) : Error(ExitCode::kNumerical, what) {}
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what) : Error(ExitCode::kNumerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::kIo, what) {}
};

/// Malformed structured input. `offset` is the byte offset reported by the parser.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(ExitCode::kValidation, what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace pcm
