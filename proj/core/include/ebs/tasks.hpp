#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ebs/joint_table.hpp"
#include "ebs/rng.hpp"
#include "ebs/types.hpp"

namespace ebs {

/// A benchmark distribution plus the exact predicate deciding whether a
/// complete sequence solves the task. The validator accepts every support
/// state of the task's joint.
struct TaskSpec {
  std::string name;  // copy_chain | parity_chain | markov_chain | shidoku
  int d = 0;
  int K = 0;
  std::vector<std::vector<double>> transition;  // markov_chain only
  std::vector<double> initial;                  // markov_chain only
  std::optional<std::vector<int>> stop_marker;
  bool require_unique = false;  // puzzles must admit exactly one completion

  JointTable build_joint() const;
  bool validate_state(const std::vector<int>& state) const;

  static TaskSpec copy_chain(int d, int K);
  static TaskSpec parity_chain(int d);
  static TaskSpec markov_chain(int d, std::vector<std::vector<double>> transition,
                               std::vector<double> initial);
  static TaskSpec shidoku();
};

/// Uniform over the K states whose d tokens are all equal.
JointTable copy_chain(int d, int K);

/// Uniform over binary states whose last token is the XOR of the first d-1.
JointTable parity_chain(int d);

/// First-order chain: q(x) = initial(x^0) * prod T(x^{i+1} | x^i), with
/// zero-probability states omitted from the support.
JointTable markov_chain(int d, const std::vector<std::vector<double>>& transition,
                        const std::vector<double>& initial);

/// Uniform over all 288 complete 4x4 Sudoku grids (d = 16, K = 4): every row,
/// column, and 2x2 box is a permutation of {0..3}.
JointTable shidoku();

/// Draws a support state and masks d - n_given positions uniformly. For
/// uniqueness-requiring tasks, rejection-samples until the revealed cells
/// admit exactly one completion (by support filtering); throws
/// UniquenessUnreachable after the retry cap.
MaskedSequence make_puzzle(const TaskSpec& task, const JointTable& joint,
                           int n_given, RngStream& rng, int max_retries = 1000);

struct AccuracyResult {
  double value = 1.0;
  bool vacuous = false;  // empty batch
};

/// Fraction of fully unmasked samples passing the task validator. Throws
/// IncompleteSample when any sample still contains masks; an empty batch is
/// vacuously 1.0 with the flag set.
AccuracyResult accuracy(const std::vector<MaskedSequence>& samples,
                        const TaskSpec& task);

}  // namespace ebs
