#pragma once

// Shared value types and the error hierarchy used across the library.

#include <complex>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dkaczmarz {

using Scalar = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

/// Dense node index in [0, node_count).
using NodeId = std::size_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A Kaczmarz update was requested for an equation with a zero row.
class DegenerateEquation : public Error {
 public:
  using Error::Error;
};

/// u is not an ancestor of v (or similar order relation failure).
class RelationError : public Error {
 public:
  using Error::Error;
};

/// Cycles in something that must be a partial order.
class OrderError : public Error {
 public:
  using Error::Error;
};

class ConnectivityError : public Error {
 public:
  using Error::Error;
};

/// An operation that only applies to leaf subnetworks got something else.
class ApplicabilityError : public Error {
 public:
  using Error::Error;
};

/// Iterative eigenvalue computation failed; carries whatever was computed.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::vector<Scalar> partial)
      : Error(what), partial_(std::move(partial)) {}
  const std::vector<Scalar>& partial() const noexcept { return partial_; }

 private:
  std::vector<Scalar> partial_;
};

/// Affine map is not a contraction on the subspace it was restricted to.
class NonContractionError : public Error {
 public:
  NonContractionError(const std::string& what, double radius)
      : Error(what), radius_(radius) {}
  double radius() const noexcept { return radius_; }

 private:
  double radius_;
};

struct Violation {
  std::string rule;  // short machine-readable tag, e.g. "weight-sum"
  std::string message;
  std::vector<NodeId> nodes;
};

/// Collected invariant violations. Empty iff the object checked is valid.
struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }

  bool has(const std::string& rule) const {
    for (const auto& v : violations)
      if (v.rule == rule) return true;
    return false;
  }

  void add(std::string rule, std::string message, std::vector<NodeId> nodes = {}) {
    violations.push_back({std::move(rule), std::move(message), std::move(nodes)});
  }

  std::string summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i) os << "; ";
      os << violations[i].rule << ": " << violations[i].message;
    }
    return os.str();
  }
};

class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport report)
      : Error("validation failed: " + report.summary()), report_(std::move(report)) {}
  ValidationError(const std::string& rule, const std::string& message)
      : ValidationError(single(rule, message)) {}
  const ValidationReport& report() const noexcept { return report_; }

 private:
  static ValidationReport single(const std::string& rule, const std::string& message) {
    ValidationReport r;
    r.add(rule, message);
    return r;
  }
  ValidationReport report_;
};

}  // namespace dkaczmarz
