#include "ebs/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace ebs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trial_json(const JointTable& joint, const SamplerPolicy* policy,
                       double epsilon, const std::string& detail) {
  nlohmann::json j;
  j["joint"] = nlohmann::json::parse(joint.to_json());
  if (policy) {
    nlohmann::json p;
    p["sampler"] = sampler_kind_name(policy->kind);
    if (policy->kind == SamplerKind::TopK) p["k"] = policy->k;
    if (policy->kind == SamplerKind::EB)
      p["gamma"] = std::isinf(policy->gamma) ? nlohmann::json("inf")
                                             : nlohmann::json(policy->gamma);
    p["proxy"] = proxy_kind_name(policy->proxy);
    p["temperature"] = policy->temperature;
    j["policy"] = std::move(p);
  }
  if (epsilon >= 0.0) j["epsilon"] = epsilon;
  j["detail"] = detail;
  return j.dump();
}

void record_failure(VerifyCheck& check, double residual, std::string replay) {
  ++check.failures;
  if (check.first_failure.empty()) check.first_failure = std::move(replay);
  if (residual > check.max_residual) check.max_residual = residual;
}

}  // namespace

JointTable random_joint(int d, int K, RngStream& rng) {
  std::size_t states = 1;
  for (int i = 0; i < d; ++i) states *= static_cast<std::size_t>(K);
  std::vector<JointTable::Entry> support;
  support.reserve(states);
  double total = 0.0;
  for (std::size_t idx = 0; idx < states; ++idx) {
    std::vector<int> state(static_cast<std::size_t>(d), 0);
    std::size_t rest = idx;
    for (int l = d - 1; l >= 0; --l) {
      state[static_cast<std::size_t>(l)] =
          static_cast<int>(rest % static_cast<std::size_t>(K));
      rest /= static_cast<std::size_t>(K);
    }
    // Exponential weights give a dense random simplex point with every state
    // reachable, so support replay never hits inconsistent evidence.
    const double w = -std::log(1.0 - rng.next_unit()) + 1e-6;
    support.push_back({std::move(state), w});
    total += w;
  }
  for (auto& e : support) e.prob /= total;
  return JointTable(d, K, std::move(support));
}

SamplerPolicy random_deterministic_policy(int d, RngStream& rng) {
  const ProxyKind proxy = static_cast<ProxyKind>(rng.next_below(3));
  if (rng.next_below(2) == 0)
    return SamplerPolicy::topk(1 + rng.next_below(d), proxy, 1.0);
  double gamma;
  switch (rng.next_below(4)) {
    case 0: gamma = 0.0; break;
    case 1: gamma = kInf; break;
    default: gamma = rng.next_unit(); break;
  }
  return SamplerPolicy::eb(gamma, proxy, 1.0);
}

VerifyReport run_verification(const VerifyOptions& options) {
  VerifyReport report;
  RngStream rng(options.seed);

  auto make_predictor = [&](const JointTable& joint, double epsilon)
      -> std::shared_ptr<const ConditionalPredictor> {
    if (options.predictor_factory) return options.predictor_factory(joint, epsilon);
    return std::make_shared<PerturbedOracle>(joint, epsilon);
  };

  // Decomposition identity and marginal-KL equality share the trial stream.
  VerifyCheck decomposition;
  decomposition.name = "decomposition_identity";
  VerifyCheck marginal_eq;
  marginal_eq.name = "marginal_kl_equality";
  for (int t = 0; t < options.decomposition_trials; ++t) {
    const int d = 2 + rng.next_below(3);  // 2..4
    const int K = 2 + rng.next_below(2);  // 2..3
    const JointTable joint = random_joint(d, K, rng);
    const double epsilon = 0.5 * rng.next_unit();
    const SamplerPolicy policy = random_deterministic_policy(d, rng);
    ++decomposition.trials;
    ++marginal_eq.trials;
    try {
      const auto predictor = make_predictor(joint, epsilon);
      const DecompositionReport dec = kl_decomposition(joint, *predictor, policy);
      const double residual =
          std::abs(dec.total_kl - (dec.model_error + dec.joint_dependence_error));
      if (!(residual <= options.tolerance))
        record_failure(decomposition, residual,
                       trial_json(joint, &policy, epsilon,
                                  "identity residual " + std::to_string(residual)));
      else if (residual > decomposition.max_residual)
        decomposition.max_residual = residual;

      const ExplicitDistribution sampled =
          enumerate_policy_distribution(*predictor, policy, d, K);
      const double marginal_kl = kl_divergence(joint, sampled);
      const double eq_residual = std::abs(marginal_kl - dec.total_kl);
      if (!(eq_residual <= options.tolerance))
        record_failure(marginal_eq, eq_residual,
                       trial_json(joint, &policy, epsilon,
                                  "marginal KL " + std::to_string(marginal_kl) +
                                      " vs total " + std::to_string(dec.total_kl)));
      else if (eq_residual > marginal_eq.max_residual)
        marginal_eq.max_residual = eq_residual;
    } catch (const ProtocolViolation& ex) {
      record_failure(decomposition, kInf,
                     trial_json(joint, &policy, epsilon,
                                std::string("ProtocolViolation: ") + ex.what()));
    } catch (const std::exception& ex) {
      record_failure(decomposition, kInf,
                     trial_json(joint, &policy, epsilon, ex.what()));
    }
  }
  report.checks.push_back(std::move(decomposition));
  report.checks.push_back(std::move(marginal_eq));

  // Entropy bound on the joint dependence error, plus the tight copy case.
  VerifyCheck bound;
  bound.name = "entropy_bound";
  for (int t = 0; t < options.entropy_bound_trials; ++t) {
    const int d = 2 + rng.next_below(3);
    const int K = 2 + rng.next_below(2);
    const JointTable joint = random_joint(d, K, rng);
    // Evidence: reveal a random strict subset of a random support state.
    const auto& support = joint.support();
    const std::vector<int>& state =
        support[static_cast<std::size_t>(rng.next_below(
                    static_cast<int>(support.size())))]
            .state;
    const int n_reveal = rng.next_below(d - 1);  // keep >= 2 positions masked
    std::vector<int> positions(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) positions[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < n_reveal; ++i) {
      const int j = i + rng.next_below(d - i);
      std::swap(positions[static_cast<std::size_t>(i)],
                positions[static_cast<std::size_t>(j)]);
    }
    const Vocabulary vocab(K);
    std::vector<int> tokens(static_cast<std::size_t>(d), vocab.mask_id());
    for (int i = 0; i < n_reveal; ++i)
      tokens[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])] =
          state[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])];
    const MaskedSequence evidence(vocab, std::move(tokens));
    std::vector<int> masked = evidence.masked_indices();
    // Random subset of the masked indices, size >= 1.
    const int subset_size = 1 + rng.next_below(static_cast<int>(masked.size()));
    for (int i = 0; i < subset_size; ++i) {
      const int j = i + rng.next_below(static_cast<int>(masked.size()) - i);
      std::swap(masked[static_cast<std::size_t>(i)],
                masked[static_cast<std::size_t>(j)]);
    }
    std::vector<int> subset(masked.begin(), masked.begin() + subset_size);
    std::sort(subset.begin(), subset.end());

    ++bound.trials;
    try {
      const MiBound mb = joint_dependence_mi(joint, evidence, subset);
      const double excess = mb.mi - mb.entropy_bound;
      if (!(excess <= options.entropy_tolerance))
        record_failure(bound, excess,
                       trial_json(joint, nullptr, -1.0,
                                  "mi " + std::to_string(mb.mi) + " exceeds bound " +
                                      std::to_string(mb.entropy_bound)));
      else if (excess > bound.max_residual)
        bound.max_residual = excess;
    } catch (const std::exception& ex) {
      record_failure(bound, kInf, trial_json(joint, nullptr, -1.0, ex.what()));
    }
  }
  {
    // Tight case: two copied uniform bits, mi = bound = ln 2.
    const JointTable copy(2, 2, {{{0, 0}, 0.5}, {{1, 1}, 0.5}});
    const MiBound mb =
        joint_dependence_mi(copy, MaskedSequence(Vocabulary(2), 2), {0, 1});
    ++bound.trials;
    const double ln2 = std::log(2.0);
    const double residual =
        std::max(std::abs(mb.mi - ln2), std::abs(mb.entropy_bound - ln2));
    if (!(residual <= options.entropy_tolerance))
      record_failure(bound, residual,
                     trial_json(copy, nullptr, -1.0, "tight copy case"));
    else if (residual > bound.max_residual)
      bound.max_residual = residual;
  }
  report.checks.push_back(std::move(bound));

  // Order invariance at zero model error.
  VerifyCheck exactness;
  exactness.name = "order_exactness";
  for (int t = 0; t < options.exactness_joints; ++t) {
    const int d = 2 + rng.next_below(3);
    const int K = 2 + rng.next_below(2);
    const JointTable joint = random_joint(d, K, rng);
    const ExactOracle oracle(joint);
    const ExplicitDistribution target = to_explicit(joint);
    for (int o = 0; o < options.orders_per_joint; ++o) {
      UnmaskingOrder order;
      order.order.resize(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) order.order[static_cast<std::size_t>(i)] = i;
      for (int i = 0; i < d - 1; ++i) {
        const int j = i + rng.next_below(d - i);
        std::swap(order.order[static_cast<std::size_t>(i)],
                  order.order[static_cast<std::size_t>(j)]);
      }
      ++exactness.trials;
      try {
        const ExplicitDistribution sampled =
            enumerate_order_distribution(oracle, order, d, K);
        const double tv = tv_distance(sampled, target);
        if (!(tv <= options.tolerance))
          record_failure(exactness, tv,
                         trial_json(joint, nullptr, -1.0,
                                    "TV " + std::to_string(tv)));
        else if (tv > exactness.max_residual)
          exactness.max_residual = tv;
      } catch (const std::exception& ex) {
        record_failure(exactness, kInf, trial_json(joint, nullptr, -1.0, ex.what()));
      }
    }
  }
  report.checks.push_back(std::move(exactness));

  // Wire conformance against a configured endpoint.
  if (options.external) {
    VerifyCheck conformance;
    conformance.name = "protocol_conformance";
    try {
      const ExternalPredictor predictor(*options.external);
      const int K = options.external->vocab_size > 0 ? options.external->vocab_size : 3;
      const Vocabulary vocab(K);
      for (int t = 0; t < options.conformance_cases; ++t) {
        const int d = 2 + rng.next_below(5);
        std::vector<int> tokens(static_cast<std::size_t>(d), vocab.mask_id());
        for (int i = 0; i < d; ++i)
          if (rng.next_below(2) == 0) tokens[static_cast<std::size_t>(i)] = rng.next_below(K);
        if (MaskedSequence(vocab, tokens).masked_indices().empty())
          tokens[0] = vocab.mask_id();
        const MaskedSequence seq(vocab, std::move(tokens));
        ++conformance.trials;
        try {
          validate_predictions(predictor.predict(seq), seq);
        } catch (const ProtocolViolation& ex) {
          record_failure(conformance, 1.0,
                         std::string("ProtocolViolation: ") + ex.what());
        }
      }
    } catch (const std::exception& ex) {
      ++conformance.trials;
      record_failure(conformance, 1.0, ex.what());
    }
    report.checks.push_back(std::move(conformance));
  }

  for (const VerifyCheck& c : report.checks)
    if (c.failures > 0) report.pass = false;
  return report;
}

std::string VerifyReport::to_json() const {
  nlohmann::json j;
  j["pass"] = pass;
  nlohmann::json arr = nlohmann::json::array();
  for (const VerifyCheck& c : checks) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["trials"] = c.trials;
    cj["failures"] = c.failures;
    cj["max_residual"] = std::isinf(c.max_residual)
                             ? nlohmann::json("inf")
                             : nlohmann::json(c.max_residual);
    if (!c.first_failure.empty()) {
      nlohmann::json parsed = nlohmann::json::parse(c.first_failure, nullptr, false);
      cj["first_failure"] = parsed.is_discarded() ? nlohmann::json(c.first_failure)
                                                  : std::move(parsed);
    }
    arr.push_back(std::move(cj));
  }
  j["checks"] = std::move(arr);
  return j.dump(2);
}

}  // namespace ebs
