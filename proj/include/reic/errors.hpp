#pragma once

#include <stdexcept>
#include <string>

namespace reic {

/// Raised for malformed configuration or invalid arguments (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base for every error that reflects a violated physical constraint
/// (CLI exit code 3). `kind()` is a stable identifier used in reports.
class PhysicsError : public std::runtime_error {
 public:
  PhysicsError(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define REIC_PHYSICS_ERROR(Name)                                   \
  class Name : public PhysicsError {                               \
   public:                                                         \
    explicit Name(const std::string& what) : PhysicsError(#Name, what) {} \
  };

REIC_PHYSICS_ERROR(PitTooWide)
REIC_PHYSICS_ERROR(NoPit)
REIC_PHYSICS_ERROR(TruncationError)
REIC_PHYSICS_ERROR(AliasingError)
REIC_PHYSICS_ERROR(OutOfBand)
REIC_PHYSICS_ERROR(SidebandOverlap)
REIC_PHYSICS_ERROR(StepSizeTooLarge)
REIC_PHYSICS_ERROR(AdiabaticityViolation)
REIC_PHYSICS_ERROR(Infeasible)
REIC_PHYSICS_ERROR(DegenerateMeans)
REIC_PHYSICS_ERROR(NoChain)
REIC_PHYSICS_ERROR(Stalled)

#undef REIC_PHYSICS_ERROR

}  // namespace reic
