#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include <ebs/proxies.hpp>
#include <ebs/rng.hpp>

using namespace ebs;

namespace {

std::vector<double> random_simplex(int k, RngStream& rng) {
  std::vector<double> v(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (double& x : v) {
    x = -std::log(1.0 - rng.next_unit()) + 1e-9;
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

std::vector<int> ascending_order(const std::map<int, double>& scores) {
  std::vector<std::pair<double, int>> items;
  for (const auto& [index, score] : scores) items.emplace_back(score, index);
  std::sort(items.begin(), items.end());
  std::vector<int> order;
  for (const auto& [score, index] : items) order.push_back(index);
  return order;
}

}  // namespace

TEST_SUITE("proxies") {

TEST_CASE("entropy closed forms") {
  CHECK(entropy(Categorical({1.0, 0.0})) == 0.0);
  CHECK(entropy(Categorical({0.5, 0.5})) == doctest::Approx(std::log(2.0)));
  CHECK(entropy(Categorical({0.25, 0.25, 0.25, 0.25})) ==
        doctest::Approx(std::log(4.0)));
}

TEST_CASE("error score sign conventions") {
  CHECK(error_score(Categorical({0.9, 0.1}), ProxyKind::Confidence) ==
        doctest::Approx(-0.9));
  CHECK(error_score(Categorical({0.9, 0.1}), ProxyKind::Margin) ==
        doctest::Approx(-0.8));
  CHECK(error_score(Categorical({1.0 / 3, 1.0 / 3, 1.0 / 3}), ProxyKind::Entropy) ==
        doctest::Approx(std::log(3.0)));
  // Top-2 ties give exactly zero margin.
  CHECK(error_score(Categorical({0.5, 0.5}), ProxyKind::Margin) == 0.0);
}

TEST_CASE("score_predictions composes per index") {
  PredictionSet preds;
  preds.insert(0, Categorical({1.0, 0.0}));
  preds.insert(2, Categorical({0.5, 0.5}));
  const auto scores = score_predictions(preds, ProxyKind::Entropy);
  CHECK(scores.at(0) == 0.0);
  CHECK(scores.at(2) == doctest::Approx(std::log(2.0)));
  CHECK(score_predictions(PredictionSet{}, ProxyKind::Confidence).empty());
  PredictionSet one;
  one.insert(0, Categorical({0.9, 0.1}));
  CHECK(score_predictions(one, ProxyKind::Confidence).at(0) == doctest::Approx(-0.9));
}

TEST_CASE("binary vocabularies order identically under all proxies") {
  RngStream rng(555);
  for (int trial = 0; trial < 200; ++trial) {
    PredictionSet preds;
    const int n = 2 + rng.next_below(6);
    for (int i = 0; i < n; ++i) preds.insert(i, Categorical(random_simplex(2, rng)));
    const auto by_conf = ascending_order(score_predictions(preds, ProxyKind::Confidence));
    const auto by_ent = ascending_order(score_predictions(preds, ProxyKind::Entropy));
    const auto by_margin = ascending_order(score_predictions(preds, ProxyKind::Margin));
    CHECK(by_conf == by_ent);
    CHECK(by_conf == by_margin);
  }
}

TEST_CASE("scores are invariant under vocabulary relabeling") {
  RngStream rng(556);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = 3 + rng.next_below(3);
    std::vector<double> probs = random_simplex(K, rng);
    std::vector<double> shuffled = probs;
    for (int i = 0; i < K - 1; ++i) {
      const int j = i + rng.next_below(K - i);
      std::swap(shuffled[static_cast<std::size_t>(i)],
                shuffled[static_cast<std::size_t>(j)]);
    }
    for (ProxyKind kind :
         {ProxyKind::Confidence, ProxyKind::Entropy, ProxyKind::Margin}) {
      CHECK(error_score(Categorical(probs), kind) ==
            doctest::Approx(error_score(Categorical(shuffled), kind)).epsilon(1e-12));
    }
  }
}

TEST_CASE("score ranges") {
  RngStream rng(557);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 2 + rng.next_below(4);
    const Categorical p(random_simplex(K, rng));
    const double conf = error_score(p, ProxyKind::Confidence);
    CHECK(conf >= -1.0);
    CHECK(conf <= -1.0 / K + 1e-12);
    const double h = error_score(p, ProxyKind::Entropy);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(K)) + 1e-12);
    const double margin = error_score(p, ProxyKind::Margin);
    CHECK(margin >= -1.0);
    CHECK(margin <= 0.0);
  }
}

TEST_CASE("proxy names parse exactly") {
  CHECK(parse_proxy_kind("entropy") == ProxyKind::Entropy);
  CHECK(proxy_kind_name(ProxyKind::Margin) == "margin");
  CHECK_THROWS_AS(parse_proxy_kind("Entropy"), ConfigError);
}

}  // TEST_SUITE
