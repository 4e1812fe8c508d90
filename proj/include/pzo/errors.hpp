#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace pzo {

/// Bad configuration or initial condition. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A set description that is empty or malformed at construction time.
class ConstructionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Operation evaluated at a point outside its domain (e.g. tangent cone off the set).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The exogenous parameter left its invariant set by more than the clamp tolerance.
class ExosystemInvarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite state during integration. Carries the last finite state. Exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double t, Eigen::VectorXd last_good)
      : std::runtime_error(what), time_(t), last_good_(std::move(last_good)) {}

  double time() const { return time_; }
  const Eigen::VectorXd& last_good() const { return last_good_; }

 private:
  double time_;
  Eigen::VectorXd last_good_;
};

/// File-system failure. Exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pzo
