#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ebs/analysis.hpp"
#include "ebs/predictors.hpp"
#include "ebs/wire.hpp"

namespace ebs {

/// Randomized exact-identity suite run by `ebs verify`:
///   - decomposition_identity: |total_kl - (model + joint dependence)| per trial
///   - marginal_kl_equality:   D_KL(q, p(x)) from enumeration vs joint total_kl
///   - entropy_bound:          mi <= entropy_bound (+ the tight copy case)
///   - order_exactness:        TV(enumerated fixed-order output, q) with the
///                             exact oracle
/// plus protocol_conformance when an external predictor is configured.
struct VerifyOptions {
  int decomposition_trials = 200;
  int entropy_bound_trials = 100;
  int exactness_joints = 50;
  int orders_per_joint = 10;
  int conformance_cases = 50;
  double tolerance = 1e-9;
  double entropy_tolerance = 1e-12;
  std::uint64_t seed = 0xeb5eedULL;

  /// Override the predictor used in the decomposition trials (defaults to a
  /// PerturbedOracle over the trial's joint). Lets tests inject broken
  /// predictors; failures they cause are reported, not thrown.
  std::function<std::shared_ptr<const ConditionalPredictor>(const JointTable&,
                                                            double epsilon)>
      predictor_factory;

  /// When set, run the wire-protocol conformance check against this endpoint.
  std::optional<ExternalPredictorConfig> external;
};

struct VerifyCheck {
  std::string name;
  int trials = 0;
  int failures = 0;
  double max_residual = 0.0;
  std::string first_failure;  // replay inputs serialized as JSON
};

struct VerifyReport {
  bool pass = true;
  std::vector<VerifyCheck> checks;

  std::string to_json() const;
};

VerifyReport run_verification(const VerifyOptions& options);

/// Random full-support joint over d positions and K tokens; exposed for the
/// acceptance suite, which reuses the same trial distribution.
JointTable random_joint(int d, int K, RngStream& rng);

/// Random deterministic policy (TopK or EB, random proxy, unit temperature).
SamplerPolicy random_deterministic_policy(int d, RngStream& rng);

}  // namespace ebs
