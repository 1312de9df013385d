#pragma once

#include <map>
#include <vector>

#include "ebs/errors.hpp"

namespace ebs {

/// Token alphabet: real tokens are 0..K-1, the mask sentinel is K itself
/// (one past the vocabulary, never a member of any Categorical support).
class Vocabulary {
 public:
  explicit Vocabulary(int num_tokens);

  int size() const { return size_; }     // K
  int mask_id() const { return size_; }  // sentinel, == K

  bool operator==(const Vocabulary&) const = default;

 private:
  int size_;
};

/// Probability vector over the vocabulary. Entries must be non-negative and
/// sum to 1 within 1e-9; the constructor renormalizes exactly.
class Categorical {
 public:
  static constexpr double kNormalizationTolerance = 1e-9;

  explicit Categorical(std::vector<double> probs);

  int size() const { return static_cast<int>(probs_.size()); }
  double prob(int token) const { return probs_[static_cast<std::size_t>(token)]; }
  const std::vector<double>& probs() const { return probs_; }

  static Categorical uniform(int k);

 private:
  std::vector<double> probs_;
};

/// Fixed-length token sequence where some positions may hold the mask
/// sentinel. Immutable after construction; unmasking produces a new value.
class MaskedSequence {
 public:
  MaskedSequence(Vocabulary vocab, int length);  // fully masked
  MaskedSequence(Vocabulary vocab, std::vector<int> tokens);

  int length() const { return static_cast<int>(tokens_.size()); }
  int token(int index) const { return tokens_[static_cast<std::size_t>(index)]; }
  bool is_masked(int index) const { return token(index) == vocab_.mask_id(); }
  bool fully_unmasked() const;

  std::vector<int> masked_indices() const;
  std::vector<int> unmasked_indices() const;

  const std::vector<int>& tokens() const { return tokens_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  bool operator==(const MaskedSequence&) const = default;

 private:
  Vocabulary vocab_;
  std::vector<int> tokens_;
};

/// Per-position predictions for exactly the masked indices of one sequence.
class PredictionSet {
 public:
  void insert(int index, Categorical p);
  bool contains(int index) const { return entries_.count(index) != 0; }
  const Categorical& at(int index) const;
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<int, Categorical> entries_;  // ordered keys, deterministic iteration
};

/// Indices unmasked in one step (in selection order) and the values written.
struct StepPlan {
  std::vector<int> indices;
  std::vector<int> values;

  int size() const { return static_cast<int>(indices.size()); }
};

/// Writes plan values at plan indices; every plan index must currently be
/// masked and every value must lie in the real vocabulary.
MaskedSequence apply_plan(const MaskedSequence& seq, const StepPlan& plan);

std::vector<int> masked_indices(const MaskedSequence& seq);

/// Ordered list of disjoint index sets, one per step; the union is the set of
/// indices the run unmasked.
struct OrderedPartition {
  std::vector<std::vector<int>> parts;

  /// True iff parts are pairwise disjoint and their union equals `universe`.
  bool covers(const std::vector<int>& universe) const;
};

struct TrajectoryStats {
  int nfe = 0;                      // predictor evaluations == steps taken
  std::vector<int> per_step_counts; // tokens unmasked at each step
  int effective_nfe = 0;            // steps until the stop criterion first held
  int answer_len = 0;               // region tokens preceding the marker end
};

}  // namespace ebs
