#include "doctest.h"

#include <ebs/errors.hpp>
#include <ebs/rng.hpp>
#include <ebs/types.hpp>

using namespace ebs;

namespace {

MaskedSequence seq_of(int K, std::vector<int> tokens) {
  return MaskedSequence(Vocabulary(K), std::move(tokens));
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("vocabulary invariants") {
  const Vocabulary v(3);
  CHECK(v.size() == 3);
  CHECK(v.mask_id() == 3);
  CHECK_THROWS_AS(Vocabulary(1), std::invalid_argument);
}

TEST_CASE("categorical validates and renormalizes") {
  const Categorical p({0.25, 0.75});
  CHECK(p.prob(1) == doctest::Approx(0.75));
  CHECK_THROWS_AS(Categorical({0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(Categorical({-0.1, 1.1}), std::invalid_argument);
  // Within tolerance, the constructor renormalizes to an exact unit sum.
  const Categorical q({0.5, 0.5 + 5e-10});
  double sum = 0.0;
  for (double x : q.probs()) sum += x;
  CHECK(sum == 1.0);
}

TEST_CASE("masked_indices") {
  const int m = 4;  // mask id for K=4
  CHECK(seq_of(4, {m, 3, m}).masked_indices() == std::vector<int>{0, 2});
  CHECK(seq_of(4, {1, 2, 3}).masked_indices().empty());
  CHECK(seq_of(4, {m, m}).masked_indices() == std::vector<int>{0, 1});
  CHECK(seq_of(4, {m, 3, m}).unmasked_indices() == std::vector<int>{1});
}

TEST_CASE("apply_plan writes values") {
  const int m = 2;
  const MaskedSequence seq = seq_of(2, {m, m});
  SUBCASE("single write") {
    const MaskedSequence out = apply_plan(seq, {{1}, {0}});
    CHECK(out.tokens() == std::vector<int>{m, 0});
  }
  SUBCASE("full write") {
    const MaskedSequence out = apply_plan(seq, {{0, 1}, {1, 1}});
    CHECK(out.tokens() == std::vector<int>{1, 1});
    CHECK(out.fully_unmasked());
  }
  SUBCASE("already unmasked target") {
    CHECK_THROWS_AS(apply_plan(seq_of(2, {1, m}), {{0}, {1}}), PlanTargetsUnmasked);
  }
  SUBCASE("value outside vocabulary") {
    CHECK_THROWS_AS(apply_plan(seq, {{0}, {2}}), ValueOutOfVocabulary);
  }
  SUBCASE("duplicate plan index") {
    CHECK_THROWS_AS(apply_plan(seq, {{0, 0}, {1, 1}}), PlanTargetsUnmasked);
  }
}

TEST_CASE("ordered partition coverage") {
  OrderedPartition part;
  part.parts = {{0, 2}, {}, {1}};
  CHECK(part.covers({0, 1, 2}));
  CHECK_FALSE(part.covers({0, 1}));
  part.parts.push_back({2});
  CHECK_FALSE(part.covers({0, 1, 2}));  // duplicate index
}

TEST_CASE("rng streams are reproducible and platform-pinned") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  // First output of the standard mt19937_64 engine seeded with 42.
  CHECK(RngStream(42).next_u64() == 13930160852258120406ULL);

  RngStream c = RngStream::derive(7, {1, 2});
  RngStream d = RngStream::derive(7, {1, 2});
  RngStream e = RngStream::derive(7, {2, 1});
  const std::uint64_t cv = c.next_u64();
  CHECK(cv == d.next_u64());
  CHECK(cv != e.next_u64());
}

TEST_CASE("rng bounded draws are in range and roughly uniform") {
  RngStream rng(1234);
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 50'000; ++i) {
    const int v = rng.next_below(5);
    REQUIRE(v >= 0);
    REQUIRE(v < 5);
    ++counts[v];
  }
  for (int c : counts) CHECK(std::abs(c - 10'000) < 500);
  for (int i = 0; i < 1'000; ++i) {
    const double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

}  // TEST_SUITE
