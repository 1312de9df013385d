#include <cmath>
#include <limits>
#include <memory>

#include "doctest.h"

#include <ebs/samplers.hpp>
#include <ebs/tasks.hpp>
#include <ebs/verify.hpp>

#include "test_predictors.hpp"

using namespace ebs;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

JointTable copy_joint() { return JointTable(2, 2, {{{0, 0}, 0.5}, {{1, 1}, 0.5}}); }

}  // namespace

TEST_SUITE("samplers") {

TEST_CASE("eb_select hand cases") {
  CHECK(eb_select({0.1, 0.2, 0.3}, 0.2) == 2);  // prefix diffs 0, 0.1, 0.3
  // A single high-entropy token is absorbed by the max subtraction.
  CHECK(eb_select({0.0, 0.0, 0.0, 0.7}, 0.0) == 4);
  CHECK(eb_select({0.5, 0.9, 0.1, 2.0}, kInf) == 4);
  CHECK(eb_select({1.7}, 0.0) == 1);
  CHECK_THROWS_AS(eb_select({}, 1.0), EmptyInput);
}

TEST_CASE("eb_select is monotone in gamma and selects a prefix") {
  RngStream rng(99);
  for (int trial = 0; trial < 2'000; ++trial) {
    const int n = 1 + rng.next_below(12);
    std::vector<double> h(static_cast<std::size_t>(n));
    for (double& x : h) x = rng.next_below(4) == 0 ? 0.0 : 1.5 * rng.next_unit();
    const double g1 = rng.next_unit();
    const double g2 = g1 + rng.next_unit();
    const int k1 = eb_select(h, g1);
    const int k2 = eb_select(h, g2);
    CHECK(k1 >= 1);
    CHECK(k2 <= n);
    CHECK(k1 <= k2);
    // cumsum - cummax never decreases, so the qualifying set is a prefix.
    double cumsum = 0.0, cummax = 0.0, prev = -1.0;
    for (double x : h) {
      cumsum += x;
      cummax = std::max(cummax, x);
      const double diff = cumsum - cummax;
      CHECK(diff >= prev);
      prev = diff;
    }
  }
}

TEST_CASE("draw_token") {
  RngStream rng(7);
  SUBCASE("zero temperature takes the argmax") {
    CHECK(draw_token(Categorical({0.1, 0.9}), 0.0, rng) == 1);
  }
  SUBCASE("argmax ties break to the lowest token id") {
    CHECK(draw_token(Categorical({0.5, 0.5}), 0.0, rng) == 0);
  }
  SUBCASE("unit temperature reproduces the distribution") {
    int ones = 0;
    for (int i = 0; i < 100'000; ++i)
      ones += draw_token(Categorical({0.25, 0.75}), 1.0, rng);
    CHECK(std::abs(ones / 100'000.0 - 0.75) < 0.01);
  }
  SUBCASE("zero-probability tokens are never drawn") {
    for (int i = 0; i < 2'000; ++i)
      CHECK(draw_token(Categorical({0.0, 0.3, 0.7, 0.0}), 1.0, rng) != 0);
  }
  SUBCASE("low temperature sharpens") {
    int ones = 0;
    for (int i = 0; i < 10'000; ++i)
      ones += draw_token(Categorical({0.25, 0.75}), 0.25, rng);
    // p^4 renormalized: 0.75^4 / (0.25^4 + 0.75^4) ~ 0.988
    CHECK(ones / 10'000.0 > 0.97);
  }
}

TEST_CASE("step selection rules") {
  RngStream rng(11);
  const Vocabulary vocab(2);

  SUBCASE("EB(0) with equal positive entropies unmasks exactly one") {
    const JointTable q = copy_joint();
    const ExactOracle oracle(q);
    const StepPlan plan = step(oracle, MaskedSequence(vocab, 2),
                               SamplerPolicy::eb(0.0, ProxyKind::Entropy, 1.0),
                               IndexRange{0, 2}, rng);
    CHECK(plan.size() == 1);
    CHECK(plan.indices[0] == 0);  // index-ascending tie-break
  }

  SUBCASE("EB(0) with all-zero entropies unmasks everything") {
    // Three deterministic positions: point-mass conditionals everywhere.
    const JointTable q(3, 2, {{{0, 1, 0}, 1.0}});
    const ExactOracle oracle(q);
    const StepPlan plan = step(oracle, MaskedSequence(vocab, 3),
                               SamplerPolicy::eb(0.0, ProxyKind::Entropy, 1.0),
                               IndexRange{0, 3}, rng);
    CHECK(plan.size() == 3);
  }

  SUBCASE("TopK clamps to the number of masked indices") {
    const JointTable q = ebs::copy_chain(3, 2);
    const ExactOracle oracle(q);
    const StepPlan plan = step(oracle, MaskedSequence(vocab, 3),
                               SamplerPolicy::topk(5, ProxyKind::Entropy, 1.0),
                               IndexRange{0, 3}, rng);
    CHECK(plan.size() == 3);
  }

  SUBCASE("fully unmasked region") {
    const JointTable q = copy_joint();
    const ExactOracle oracle(q);
    CHECK_THROWS_AS(step(oracle, MaskedSequence(vocab, {0, 0}),
                         SamplerPolicy::topk(1, ProxyKind::Entropy, 1.0),
                         IndexRange{0, 2}, rng),
                    NothingToUnmask);
  }
}

TEST_CASE("stop_satisfied") {
  const Vocabulary vocab(9);
  const int m = vocab.mask_id();
  const IndexRange region{0, 6};
  CHECK(stop_satisfied(MaskedSequence(vocab, {3, 1, 7, 8, m, m}), {7, 8}, region));
  CHECK_FALSE(
      stop_satisfied(MaskedSequence(vocab, {3, m, 7, 8, m, m}), {7, 8}, region));
  CHECK_FALSE(
      stop_satisfied(MaskedSequence(vocab, {3, 1, 4, m, m, m}), {7, 8}, region));
  CHECK_THROWS_AS(stop_satisfied(MaskedSequence(vocab, 6), {}, region), EmptyInput);
  // Marker must lie inside the region to count.
  CHECK_FALSE(stop_satisfied(MaskedSequence(vocab, {7, 8, m, m, m, m}), {7, 8},
                             IndexRange{2, 6}));
}

TEST_CASE("generate one-shot and sequential NFE") {
  const JointTable q = ebs::copy_chain(10, 2);
  const ExactOracle oracle(q);
  GenerationConfig config;

  SUBCASE("EB(inf) unmasks everything in one evaluation") {
    RngStream rng(3);
    const auto result =
        generate(oracle, MaskedSequence(Vocabulary(2), 10),
                 SamplerPolicy::eb(kInf, ProxyKind::Entropy, 1.0), config, rng);
    CHECK(result.stats.nfe == 1);
    CHECK(result.stats.per_step_counts == std::vector<int>{10});
    CHECK(result.sequence.fully_unmasked());
  }

  SUBCASE("Top-1 is strictly sequential") {
    RngStream rng(3);
    const auto result =
        generate(oracle, MaskedSequence(Vocabulary(2), 10),
                 SamplerPolicy::topk(1, ProxyKind::Entropy, 1.0), config, rng);
    CHECK(result.stats.nfe == 10);
    CHECK(result.stats.per_step_counts == std::vector<int>(10, 1));
  }

  SUBCASE("NFE equals the number of predictor calls") {
    // Full-support joint: multi-token independent draws stay consistent.
    RngStream joint_rng(55);
    const JointTable dense = random_joint(6, 2, joint_rng);
    const ExactOracle dense_oracle(dense);
    RngStream rng(3);
    const ebs::testing::CountingPredictor counting(dense_oracle);
    const auto result =
        generate(counting, MaskedSequence(Vocabulary(2), 6),
                 SamplerPolicy::topk(3, ProxyKind::Confidence, 1.0), config, rng);
    CHECK(result.stats.nfe == counting.calls());
    CHECK(result.stats.nfe == 2);  // 6 masked, 3 per step
  }
}

TEST_CASE("trajectory replay reproduces the final sequence") {
  RngStream rng(12345);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 3 + rng.next_below(3);
    const int K = 2 + rng.next_below(2);
    const JointTable q = random_joint(d, K, rng);
    const PerturbedOracle oracle(q, 0.3);
    const SamplerPolicy policy =
        trial % 2 == 0 ? SamplerPolicy::eb(0.2, ProxyKind::Confidence, 1.0)
                       : SamplerPolicy::random_unmasking(1.0);
    MaskedSequence initial(Vocabulary(K), d);
    RngStream gen_rng = RngStream::derive(999, {static_cast<std::uint64_t>(trial)});
    const auto result = generate(oracle, initial, policy, GenerationConfig{}, gen_rng);

    // Applying the recovered plans in order reproduces the final sequence,
    // and the concatenated indices are a permutation of the masked set.
    MaskedSequence replay = initial;
    for (const auto& part : result.partition.parts) {
      StepPlan plan;
      plan.indices = part;
      for (int l : part) plan.values.push_back(result.sequence.token(l));
      replay = apply_plan(replay, plan);
    }
    CHECK(replay.tokens() == result.sequence.tokens());
    CHECK(result.partition.covers(initial.masked_indices()));
  }
}

TEST_CASE("region safety and prompt preservation") {
  RngStream rng(4242);
  const JointTable q = random_joint(6, 2, rng);
  const PerturbedOracle oracle(q, 0.5);
  const Vocabulary vocab(2);
  std::vector<int> tokens(6, vocab.mask_id());
  tokens[0] = 1;  // prompt inside the sequence, outside the region
  const MaskedSequence initial(vocab, tokens);
  GenerationConfig config;
  config.region = IndexRange{2, 6};

  RngStream gen_rng(5);
  const auto result = generate(
      oracle, initial, SamplerPolicy::topk(2, ProxyKind::Margin, 1.0), config, gen_rng);
  CHECK(result.sequence.token(0) == 1);
  CHECK(result.sequence.is_masked(1));  // outside region, untouched
  for (int i = 2; i < 6; ++i) CHECK_FALSE(result.sequence.is_masked(i));
  for (const auto& part : result.partition.parts)
    for (int l : part) CHECK(IndexRange{2, 6}.contains(l));
}

TEST_CASE("semi-AR blocks open strictly in order") {
  RngStream rng(777);
  const JointTable q = random_joint(8, 2, rng);
  const PerturbedOracle oracle(q, 0.4);
  GenerationConfig config;
  config.block_len = 3;  // blocks [0,3) [3,6) [6,8)

  RngStream gen_rng(6);
  const auto result =
      generate(oracle, MaskedSequence(Vocabulary(2), 8),
               SamplerPolicy::eb(kInf, ProxyKind::Entropy, 1.0), config, gen_rng);

  // No index in block b+1 may be unmasked while block b still has masks.
  std::vector<bool> unmasked(8, false);
  for (const auto& part : result.partition.parts) {
    const int block = part.front() / 3;
    for (int l : part) CHECK(l / 3 == block);
    for (int b = 0; b < block; ++b)
      for (int i = 3 * b; i < std::min(3 * (b + 1), 8); ++i) CHECK(unmasked[i]);
    for (int l : part) unmasked[static_cast<std::size_t>(l)] = true;
  }
  // EB(inf) within a block unmasks the whole block at once.
  CHECK(result.stats.nfe == 3);
}

TEST_CASE("stop marker halts generation and sets the accounting") {
  // Deterministic joint: the sequence is always 0 1 2 0 1 2; marker [1, 2]
  // completes once the first three positions are unmasked.
  const JointTable q(6, 3, {{{0, 1, 2, 0, 1, 2}, 1.0}});
  const ExactOracle oracle(q);
  GenerationConfig config;
  config.stop_marker = std::vector<int>{1, 2};

  RngStream rng(9);
  const auto result =
      generate(oracle, MaskedSequence(Vocabulary(3), 6),
               SamplerPolicy::topk(1, ProxyKind::Entropy, 0.0), config, rng);
  // Top-1 with all-zero entropies unmasks index-ascending: 0, 1, 2 -> stop.
  CHECK(result.stats.nfe == 3);
  CHECK(result.stats.effective_nfe == 3);
  CHECK(result.stats.answer_len == 3);
  CHECK(result.sequence.is_masked(5));
  CHECK(result.stats.effective_nfe <= result.stats.nfe);
}

TEST_CASE("stall guard") {
  const JointTable q = ebs::copy_chain(4, 2);
  const ExactOracle oracle(q);
  GenerationConfig config;
  config.max_steps = 2;  // below the region length on purpose
  RngStream rng(1);
  CHECK_THROWS_AS(generate(oracle, MaskedSequence(Vocabulary(2), 4),
                           SamplerPolicy::topk(1, ProxyKind::Entropy, 1.0),
                           config, rng),
                  StallDetected);
}

TEST_CASE("EB(0) equals Top-1 when entropies stay positive") {
  RngStream rng(31415);
  for (ProxyKind proxy :
       {ProxyKind::Confidence, ProxyKind::Entropy, ProxyKind::Margin}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int d = 3 + rng.next_below(3);
      const int K = 2 + rng.next_below(2);
      const JointTable q = random_joint(d, K, rng);
      const PerturbedOracle oracle(q, 0.2);  // all probabilities positive
      const std::uint64_t seed = rng.next_u64();

      RngStream rng_eb(seed);
      const auto eb = generate(oracle, MaskedSequence(Vocabulary(K), d),
                               SamplerPolicy::eb(0.0, proxy, 1.0),
                               GenerationConfig{}, rng_eb);
      RngStream rng_top(seed);
      const auto top = generate(oracle, MaskedSequence(Vocabulary(K), d),
                                SamplerPolicy::topk(1, proxy, 1.0),
                                GenerationConfig{}, rng_top);
      CHECK(eb.sequence.tokens() == top.sequence.tokens());
      CHECK(eb.partition.parts == top.partition.parts);
      CHECK(eb.stats.nfe == top.stats.nfe);
    }
  }
}

}  // TEST_SUITE
