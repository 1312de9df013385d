#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ebs/types.hpp"

namespace ebs {

/// Explicit joint distribution over a small state space, the ground truth
/// against which predictors and samplers are verified. Stored as a sparse
/// support list; all conditionals are computed by full support scans.
class JointTable {
 public:
  static constexpr std::size_t kDefaultSupportCap = 1'000'000;

  struct Entry {
    std::vector<int> state;  // length d, entries in 0..K-1
    double prob;             // > 0
  };

  JointTable(int d, int K, std::vector<Entry> support,
             std::size_t cap = kDefaultSupportCap);

  int d() const { return d_; }
  int K() const { return K_; }
  const std::vector<Entry>& support() const { return support_; }

  /// Probability of a complete state (0 if off-support).
  double prob(const std::vector<int>& state) const;

  /// True conditionals q(x^l | evidence) for every masked index l of `seq`,
  /// by marginalizing the support over states that agree with the unmasked
  /// positions. Throws InconsistentEvidence when no support state matches.
  PredictionSet exact_conditionals(const MaskedSequence& seq) const;

  /// Joint conditional q(x^subset | evidence) as a dense table over K^|subset|
  /// assignments in lexicographic order (first subset index most significant).
  std::vector<double> conditional_joint(const MaskedSequence& evidence,
                                        const std::vector<int>& subset) const;

  std::string to_json() const;
  static JointTable from_json(const std::string& text);
  void save(const std::string& path) const;
  static JointTable load(const std::string& path);

 private:
  int d_;
  int K_;
  std::vector<Entry> support_;
};

}  // namespace ebs
