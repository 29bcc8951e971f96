#pragma once

#include <stdexcept>
#include <string>

namespace lvchaos {

// Every failure raised by the library derives from this type; the CLI maps
// domain/config errors to exit code 2.
class error : public std::runtime_error {
 public:
  error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define LVCHAOS_DEFINE_ERROR(Name)                                   \
  class Name : public error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : error(#Name, what) {}   \
  };

LVCHAOS_DEFINE_ERROR(InvalidParams)
LVCHAOS_DEFINE_ERROR(MuOutOfRange)
LVCHAOS_DEFINE_ERROR(DomainError)
LVCHAOS_DEFINE_ERROR(EnergyBudgetExceeded)
LVCHAOS_DEFINE_ERROR(StepFailure)
LVCHAOS_DEFINE_ERROR(CenterHit)
LVCHAOS_DEFINE_ERROR(NoSignChange)
LVCHAOS_DEFINE_ERROR(LevelBelowMinimum)
LVCHAOS_DEFINE_ERROR(NotLinked)
LVCHAOS_DEFINE_ERROR(NonTwist)
LVCHAOS_DEFINE_ERROR(MonotonicityViolated)
LVCHAOS_DEFINE_ERROR(OutOfCertifiedRange)
LVCHAOS_DEFINE_ERROR(RefinementBudgetExceeded)
LVCHAOS_DEFINE_ERROR(WitnessNotFound)
LVCHAOS_DEFINE_ERROR(BandEdgeAmbiguous)
LVCHAOS_DEFINE_ERROR(NotFound)
LVCHAOS_DEFINE_ERROR(ItineraryDrift)
LVCHAOS_DEFINE_ERROR(LeftDomain)
LVCHAOS_DEFINE_ERROR(ConfigError)

#undef LVCHAOS_DEFINE_ERROR

}  // namespace lvchaos
