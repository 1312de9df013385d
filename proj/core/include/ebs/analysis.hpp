#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ebs/joint_table.hpp"
#include "ebs/predictors.hpp"
#include "ebs/samplers.hpp"
#include "ebs/types.hpp"

namespace ebs {

// Exact verification machinery for deterministic unmasking policies: the
// sampler's output distribution by exhaustive branching, the two-term KL
// error decomposition by support replay, and the mutual-information entropy
// bound. Everything here is computed in closed form over small state spaces;
// nothing is estimated by sampling.

constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

/// Dense distribution over all K^d states. State index is mixed-radix with
/// position 0 most significant.
struct ExplicitDistribution {
  int d = 0;
  int K = 0;
  std::vector<double> probs;

  static std::size_t state_count(int d, int K,
                                 std::size_t cap = kDefaultEnumerationCap);
  std::size_t index_of(const std::vector<int>& state) const;
  std::vector<int> state_of(std::size_t index) const;
  double total() const;
};

ExplicitDistribution to_explicit(const JointTable& joint,
                                 std::size_t cap = kDefaultEnumerationCap);

/// Per-step expectations of the error decomposition, all in nats.
struct StepErrors {
  double model_error = 0.0;
  double joint_dependence_error = 0.0;
  double total_kl = 0.0;
};

/// Error decomposition of one (predictor, policy) pair against a joint:
/// total_kl = model_error + joint_dependence_error, each a sum over steps.
/// Components may be +infinity when the predictor assigns zero probability
/// to a supported token; infinity is a reported value, not an error.
struct DecompositionReport {
  double total_kl = 0.0;
  double model_error = 0.0;
  double joint_dependence_error = 0.0;
  std::vector<StepErrors> per_step;

  std::string to_json() const;
};

/// Exact output distribution p(x) of a deterministic policy by recursive
/// branching: each step evaluates the predictor, selects the unmask set, and
/// branches over every joint value assignment weighted by the product of the
/// predicted conditionals. Requires unit temperature (branch weights are the
/// predictor's probabilities themselves).
ExplicitDistribution enumerate_policy_distribution(
    const ConditionalPredictor& predictor, const SamplerPolicy& policy, int d,
    int K, std::size_t cap = kDefaultEnumerationCap);

/// Fixed unmasking order, one index per step.
struct UnmaskingOrder {
  std::vector<int> order;  // permutation of 0..d-1

  void validate(int d) const;
};

/// Exact output distribution of sequential sampling along a fixed order.
ExplicitDistribution enumerate_order_distribution(
    const ConditionalPredictor& predictor, const UnmaskingOrder& order, int d,
    int K, std::size_t cap = kDefaultEnumerationCap);

/// Error decomposition by support replay: every support state of q is
/// replayed through the deterministic policy (revealing its true coordinates
/// at each selected set), accumulating the per-step model error and joint
/// dependence error KLs and, independently, the realized joint KL.
DecompositionReport kl_decomposition(const JointTable& q,
                                     const ConditionalPredictor& predictor,
                                     const SamplerPolicy& policy);

struct MiBound {
  double mi = 0.0;             // D_KL(joint conditional, product of marginals)
  double entropy_bound = 0.0;  // sum of marginal entropies minus their max
};

/// Mutual information of a masked index subset under q given the evidence,
/// together with its entropy upper bound.
MiBound joint_dependence_mi(const JointTable& q, const MaskedSequence& evidence,
                            const std::vector<int>& subset);

/// D_KL(q, p_sigma) where p_sigma unmasks one index per step in the fixed
/// order sigma using the predictor's conditionals. +infinity on support
/// mismatch.
double order_total_error(const JointTable& q,
                         const ConditionalPredictor& predictor,
                         const UnmaskingOrder& order);

double tv_distance(const ExplicitDistribution& a, const ExplicitDistribution& b);
double kl_divergence(const ExplicitDistribution& a, const ExplicitDistribution& b);
double kl_divergence(const Categorical& a, const Categorical& b);

/// D_KL(q, p) over the support of q; +infinity when p vanishes on it.
double kl_divergence(const JointTable& q, const ExplicitDistribution& p);

/// Deterministic pairwise reduction, used for bit-stable accumulation of
/// per-state contributions.
double pairwise_sum(std::vector<double> values);

}  // namespace ebs
