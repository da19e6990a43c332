#pragma once

#include <stdexcept>
#include <string>

namespace fbdnn {

/// Failure class, mapped onto process exit codes by the CLI.
enum class ErrorKind {
  validation = 2,  ///< bad input, shape, label or configuration
  numerical = 3,   ///< divergence or non-finite values during fitting
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::validation, w) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::validation, w) {}
};

struct LabelError : Error {
  explicit LabelError(const std::string& w) : Error(ErrorKind::validation, w) {}
};

struct LoadError : Error {
  explicit LoadError(const std::string& w) : Error(ErrorKind::validation, w) {}
};

struct StratificationError : Error {
  explicit StratificationError(const std::string& w)
      : Error(ErrorKind::validation, w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::validation, w) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& w)
      : Error(ErrorKind::numerical, w) {}
};

struct SelectionError : Error {
  explicit SelectionError(const std::string& w)
      : Error(ErrorKind::numerical, w) {}
};

/// Process exit code for an exception escaping a CLI command.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace fbdnn
