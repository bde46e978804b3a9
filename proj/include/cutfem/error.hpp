#ifndef CUTFEM_ERROR_HPP
#define CUTFEM_ERROR_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace cutfem {

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent user configuration (penalties, empty submeshes, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A point or argument outside the domain where an operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable input file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to reach the requested tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history, int rhs_index = -1)
      : Error(what), residual_history_(std::move(history)), rhs_index_(rhs_index) {}

  const std::vector<double>& residual_history() const { return residual_history_; }
  /// Position of the failing right-hand side in a block solve, or -1.
  int rhs_index() const { return rhs_index_; }

 private:
  std::vector<double> residual_history_;
  int rhs_index_;
};

}  // namespace cutfem

#endif
