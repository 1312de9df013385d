#pragma once

#include <stdexcept>
#include <string>

namespace ebs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// core
struct PlanTargetsUnmasked : Error {
  using Error::Error;
};
struct ValueOutOfVocabulary : Error {
  using Error::Error;
};

// models
struct InconsistentEvidence : Error {
  using Error::Error;
};
struct ProtocolViolation : Error {
  using Error::Error;
};
struct CapExceeded : Error {
  using Error::Error;
};

// samplers
struct EmptyInput : Error {
  using Error::Error;
};
struct NothingToUnmask : Error {
  using Error::Error;
};
struct StallDetected : Error {
  using Error::Error;
};

// analysis
struct SpaceMismatch : Error {
  using Error::Error;
};

// tasks
struct IncompleteSample : Error {
  using Error::Error;
};
struct UniquenessUnreachable : Error {
  using Error::Error;
};

// cli / config
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace ebs
