#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isosim {

/// Base class for every error raised by the library. `exit_code()` is the
/// process status the command-line tool reports for this error category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

/// Carries every violation found, not just the first one.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  explicit ValidationError(const std::string& violation)
      : ValidationError(std::vector<std::string>{violation}) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }
  int exit_code() const noexcept override { return 2; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

/// Lexer and parser failures; `position()` is a byte offset into the source.
class SyntaxError : public ValidationError {
 public:
  SyntaxError(const std::string& message, std::size_t position)
      : ValidationError(message + " at offset " + std::to_string(position)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& message, double best_residual = 0.0)
      : Error(message), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }
  int exit_code() const noexcept override { return 4; }

 private:
  double best_residual_;
};

}  // namespace isosim
