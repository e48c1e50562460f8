#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bbranch {

/// A value lies outside the admissible range of a nonlinearity or formula.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Newton iteration failed to reach the residual tolerance.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// An iterate of the singular nonlinearity reached u >= 1 at some node.
class TouchdownError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inverse iteration did not settle; carries the Rayleigh quotient history.
class SpectralError : public std::runtime_error {
 public:
  SpectralError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// A persisted file carries an unknown or missing schema version.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bbranch
