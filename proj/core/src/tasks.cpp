#include "ebs/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ebs {

namespace {

constexpr std::size_t kTaskCap = JointTable::kDefaultSupportCap;

bool shidoku_valid(const std::vector<int>& grid) {
  auto group_ok = [&](const int cells[4]) {
    unsigned seen = 0;
    for (int i = 0; i < 4; ++i) {
      const int v = grid[static_cast<std::size_t>(cells[i])];
      if (v < 0 || v > 3) return false;
      seen |= 1u << v;
    }
    return seen == 0xFu;
  };
  for (int r = 0; r < 4; ++r) {
    const int row[4] = {4 * r, 4 * r + 1, 4 * r + 2, 4 * r + 3};
    if (!group_ok(row)) return false;
  }
  for (int c = 0; c < 4; ++c) {
    const int col[4] = {c, c + 4, c + 8, c + 12};
    if (!group_ok(col)) return false;
  }
  for (int br = 0; br < 2; ++br) {
    for (int bc = 0; bc < 2; ++bc) {
      const int base = 8 * br + 2 * bc;
      const int box[4] = {base, base + 1, base + 4, base + 5};
      if (!group_ok(box)) return false;
    }
  }
  return true;
}

void shidoku_fill(std::vector<int>& grid, int cell, unsigned row_used[4],
                  unsigned col_used[4], unsigned box_used[4],
                  std::vector<JointTable::Entry>& out) {
  if (cell == 16) {
    out.push_back({grid, 1.0});
    return;
  }
  const int r = cell / 4;
  const int c = cell % 4;
  const int b = 2 * (r / 2) + c / 2;
  for (int v = 0; v < 4; ++v) {
    const unsigned bit = 1u << v;
    if ((row_used[r] | col_used[c] | box_used[b]) & bit) continue;
    grid[static_cast<std::size_t>(cell)] = v;
    row_used[r] |= bit;
    col_used[c] |= bit;
    box_used[b] |= bit;
    shidoku_fill(grid, cell + 1, row_used, col_used, box_used, out);
    row_used[r] &= ~bit;
    col_used[c] &= ~bit;
    box_used[b] &= ~bit;
  }
}

double markov_state_prob(const TaskSpec& task, const std::vector<int>& state) {
  double p = task.initial[static_cast<std::size_t>(state[0])];
  for (int i = 0; i + 1 < task.d && p > 0.0; ++i)
    p *= task.transition[static_cast<std::size_t>(state[static_cast<std::size_t>(i)])]
                        [static_cast<std::size_t>(state[static_cast<std::size_t>(i + 1)])];
  return p;
}

}  // namespace

JointTable copy_chain(int d, int K) {
  if (d < 1) throw std::invalid_argument("copy_chain: d must be >= 1");
  if (K < 2) throw std::invalid_argument("copy_chain: K must be >= 2");
  std::vector<JointTable::Entry> support;
  support.reserve(static_cast<std::size_t>(K));
  for (int v = 0; v < K; ++v)
    support.push_back({std::vector<int>(static_cast<std::size_t>(d), v), 1.0 / K});
  return JointTable(d, K, std::move(support), kTaskCap);
}

JointTable parity_chain(int d) {
  if (d < 2) throw std::invalid_argument("parity_chain: d must be >= 2");
  if (d - 1 >= 63 || (1ULL << (d - 1)) > kTaskCap)
    throw CapExceeded("parity_chain: 2^(d-1) exceeds the support cap");
  const std::size_t n = 1ULL << (d - 1);
  std::vector<JointTable::Entry> support;
  support.reserve(n);
  for (std::size_t bits = 0; bits < n; ++bits) {
    std::vector<int> state(static_cast<std::size_t>(d), 0);
    int parity = 0;
    for (int i = 0; i < d - 1; ++i) {
      const int b = static_cast<int>((bits >> i) & 1u);
      state[static_cast<std::size_t>(i)] = b;
      parity ^= b;
    }
    state[static_cast<std::size_t>(d - 1)] = parity;
    support.push_back({std::move(state), 1.0 / static_cast<double>(n)});
  }
  return JointTable(d, 2, std::move(support), kTaskCap);
}

JointTable markov_chain(int d, const std::vector<std::vector<double>>& transition,
                        const std::vector<double>& initial) {
  if (d < 1) throw std::invalid_argument("markov_chain: d must be >= 1");
  const int K = static_cast<int>(initial.size());
  if (K < 2) throw std::invalid_argument("markov_chain: K must be >= 2");
  if (static_cast<int>(transition.size()) != K)
    throw std::invalid_argument("markov_chain: transition must be K x K");
  for (const auto& row : transition) {
    if (static_cast<int>(row.size()) != K)
      throw std::invalid_argument("markov_chain: transition must be K x K");
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0))
        throw std::invalid_argument("markov_chain: negative transition entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > Categorical::kNormalizationTolerance)
      throw std::invalid_argument("markov_chain: transition row not stochastic");
  }

  std::size_t states = 1;
  for (int i = 0; i < d; ++i) {
    if (states > kTaskCap / static_cast<std::size_t>(K))
      throw CapExceeded("markov_chain: K^d exceeds the support cap");
    states *= static_cast<std::size_t>(K);
  }

  std::vector<JointTable::Entry> support;
  std::vector<int> state(static_cast<std::size_t>(d), 0);
  for (std::size_t idx = 0; idx < states; ++idx) {
    std::size_t rest = idx;
    for (int l = d - 1; l >= 0; --l) {
      state[static_cast<std::size_t>(l)] =
          static_cast<int>(rest % static_cast<std::size_t>(K));
      rest /= static_cast<std::size_t>(K);
    }
    double p = initial[static_cast<std::size_t>(state[0])];
    for (int i = 0; i + 1 < d && p > 0.0; ++i)
      p *= transition[static_cast<std::size_t>(state[static_cast<std::size_t>(i)])]
                     [static_cast<std::size_t>(state[static_cast<std::size_t>(i + 1)])];
    if (p > 0.0) support.push_back({state, p});
  }
  return JointTable(d, K, std::move(support), kTaskCap);
}

JointTable shidoku() {
  std::vector<JointTable::Entry> support;
  std::vector<int> grid(16, 0);
  unsigned row_used[4] = {0, 0, 0, 0};
  unsigned col_used[4] = {0, 0, 0, 0};
  unsigned box_used[4] = {0, 0, 0, 0};
  shidoku_fill(grid, 0, row_used, col_used, box_used, support);
  const double p = 1.0 / static_cast<double>(support.size());
  for (auto& e : support) e.prob = p;
  return JointTable(16, 4, std::move(support), kTaskCap);
}

JointTable TaskSpec::build_joint() const {
  if (name == "copy_chain") return ebs::copy_chain(d, K);
  if (name == "parity_chain") return ebs::parity_chain(d);
  if (name == "markov_chain") return ebs::markov_chain(d, transition, initial);
  if (name == "shidoku") return ebs::shidoku();
  throw ConfigError("unknown task: " + name);
}

bool TaskSpec::validate_state(const std::vector<int>& state) const {
  if (static_cast<int>(state.size()) != d) return false;
  if (name == "copy_chain") {
    return std::all_of(state.begin(), state.end(),
                       [&](int v) { return v == state[0]; });
  }
  if (name == "parity_chain") {
    int parity = 0;
    for (int i = 0; i < d - 1; ++i) parity ^= state[static_cast<std::size_t>(i)];
    return state[static_cast<std::size_t>(d - 1)] == parity;
  }
  if (name == "markov_chain") return markov_state_prob(*this, state) > 0.0;
  if (name == "shidoku") return shidoku_valid(state);
  throw ConfigError("unknown task: " + name);
}

TaskSpec TaskSpec::copy_chain(int d, int K) {
  TaskSpec t;
  t.name = "copy_chain";
  t.d = d;
  t.K = K;
  return t;
}

TaskSpec TaskSpec::parity_chain(int d) {
  TaskSpec t;
  t.name = "parity_chain";
  t.d = d;
  t.K = 2;
  return t;
}

TaskSpec TaskSpec::markov_chain(int d, std::vector<std::vector<double>> transition,
                                std::vector<double> initial) {
  TaskSpec t;
  t.name = "markov_chain";
  t.d = d;
  t.K = static_cast<int>(initial.size());
  t.transition = std::move(transition);
  t.initial = std::move(initial);
  return t;
}

TaskSpec TaskSpec::shidoku() {
  TaskSpec t;
  t.name = "shidoku";
  t.d = 16;
  t.K = 4;
  t.require_unique = true;
  return t;
}

MaskedSequence make_puzzle(const TaskSpec& task, const JointTable& joint,
                           int n_given, RngStream& rng, int max_retries) {
  const int d = joint.d();
  if (n_given < 0 || n_given >= d)
    throw std::invalid_argument("make_puzzle: need 0 <= n_given < d");
  const Vocabulary vocab(joint.K());

  for (int attempt = 0; attempt < max_retries; ++attempt) {
    // Weighted support draw.
    const double u = rng.next_unit();
    double cum = 0.0;
    const auto& support = joint.support();
    std::size_t pick = support.size() - 1;
    for (std::size_t i = 0; i < support.size(); ++i) {
      cum += support[i].prob;
      if (u < cum) {
        pick = i;
        break;
      }
    }
    // Choose the given positions by partial Fisher-Yates.
    std::vector<int> positions(static_cast<std::size_t>(d));
    std::iota(positions.begin(), positions.end(), 0);
    for (int i = 0; i < n_given; ++i) {
      const int j = i + rng.next_below(d - i);
      std::swap(positions[static_cast<std::size_t>(i)],
                positions[static_cast<std::size_t>(j)]);
    }
    std::vector<int> tokens(static_cast<std::size_t>(d), vocab.mask_id());
    for (int i = 0; i < n_given; ++i) {
      const int pos = positions[static_cast<std::size_t>(i)];
      tokens[static_cast<std::size_t>(pos)] =
          support[pick].state[static_cast<std::size_t>(pos)];
    }
    MaskedSequence puzzle(vocab, std::move(tokens));
    if (!task.require_unique) return puzzle;

    int completions = 0;
    for (const auto& e : support) {
      bool matches = true;
      for (int i = 0; i < d && matches; ++i)
        if (!puzzle.is_masked(i) && e.state[static_cast<std::size_t>(i)] != puzzle.token(i))
          matches = false;
      if (matches && ++completions > 1) break;
    }
    if (completions == 1) return puzzle;
  }
  throw UniquenessUnreachable("make_puzzle: no unique-completion puzzle after " +
                              std::to_string(max_retries) + " attempts");
}

AccuracyResult accuracy(const std::vector<MaskedSequence>& samples,
                        const TaskSpec& task) {
  if (samples.empty()) return AccuracyResult{1.0, true};
  int valid = 0;
  for (const MaskedSequence& s : samples) {
    if (!s.fully_unmasked())
      throw IncompleteSample("accuracy: sample still contains masked positions");
    if (task.validate_state(s.tokens())) ++valid;
  }
  return AccuracyResult{static_cast<double>(valid) /
                            static_cast<double>(samples.size()),
                        false};
}

}  // namespace ebs
