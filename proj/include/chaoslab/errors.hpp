#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chaoslab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Grid too coarse to resolve the mollifier V^N.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimension : public Error {
 public:
  using Error::Error;
};

// Parameter outside the window a convergence theorem admits.
class AdmissibilityError : public Error {
 public:
  using Error::Error;
};

// Everything that stops a time integration: CFL, blow-up, undershoot, NaN.
class NumericalAbort : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public NumericalAbort {
 public:
  IntegrationError(const std::string& what, long particle)
      : NumericalAbort(what), particle_(particle) {}
  long particle() const { return particle_; }

 private:
  long particle_;
};

class StepSizeError : public NumericalAbort {
 public:
  StepSizeError(const std::string& what, double ratio)
      : NumericalAbort(what), ratio_(ratio) {}
  double ratio() const { return ratio_; }

 private:
  double ratio_;
};

class BlowUpError : public NumericalAbort {
 public:
  using NumericalAbort::NumericalAbort;
};

class NonnegativityError : public NumericalAbort {
 public:
  using NumericalAbort::NumericalAbort;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& item : items) out += "\n  - " + item;
    return out;
  }
  std::vector<std::string> problems_;
};

struct FailedReplica {
  long n_particles;
  std::uint64_t seed;
  std::string reason;
};

class ReplicaFailure : public Error {
 public:
  explicit ReplicaFailure(std::vector<FailedReplica> failed)
      : Error(describe(failed)), failed_(std::move(failed)) {}
  const std::vector<FailedReplica>& failed() const { return failed_; }

 private:
  static std::string describe(const std::vector<FailedReplica>& failed) {
    std::string out = "replica failures:";
    for (const auto& f : failed)
      out += "\n  N=" + std::to_string(f.n_particles) + " seed=" + std::to_string(f.seed) +
             ": " + f.reason;
    return out;
  }
  std::vector<FailedReplica> failed_;
};

}  // namespace chaoslab
