#include "ebs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ebs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_enumerable_policy(const SamplerPolicy& policy) {
  if (!policy.deterministic_selection())
    throw std::invalid_argument(
        "analysis: random unmasking is not a deterministic policy");
  if (policy.temperature != 1.0)
    throw std::invalid_argument(
        "analysis: exact accounting samples values from the predicted "
        "conditionals; use temperature 1");
  policy.validate();
}

using Selector = std::function<std::vector<int>(const MaskedSequence&,
                                                const PredictionSet&)>;

Selector policy_selector(const SamplerPolicy& policy) {
  return [policy](const MaskedSequence& seq, const PredictionSet& preds) {
    return select_unmask_indices(preds, policy, seq.masked_indices());
  };
}

Selector order_selector(const UnmaskingOrder& order) {
  return [order](const MaskedSequence& seq, const PredictionSet&) {
    const int done = static_cast<int>(seq.unmasked_indices().size());
    return std::vector<int>{order.order[static_cast<std::size_t>(done)]};
  };
}

void enumerate_recursive(const ConditionalPredictor& predictor,
                         const Selector& select, const MaskedSequence& seq,
                         double weight, ExplicitDistribution& dist) {
  if (seq.fully_unmasked()) {
    dist.probs[dist.index_of(seq.tokens())] += weight;
    return;
  }
  const PredictionSet preds = predictor.predict(seq);
  const std::vector<int> z = select(seq, preds);
  const int n = static_cast<int>(z.size());
  const int K = dist.K;
  std::vector<int> values(static_cast<std::size_t>(n), 0);
  // Odometer over all K^n value assignments; zero-probability branches are
  // skipped.
  while (true) {
    double factor = 1.0;
    for (int j = 0; j < n; ++j) {
      factor *= preds.at(z[static_cast<std::size_t>(j)])
                    .prob(values[static_cast<std::size_t>(j)]);
      if (factor == 0.0) break;
    }
    if (factor > 0.0) {
      StepPlan plan{z, values};
      enumerate_recursive(predictor, select, apply_plan(seq, plan),
                          weight * factor, dist);
    }
    int pos = n - 1;
    while (pos >= 0 && values[static_cast<std::size_t>(pos)] == K - 1) {
      values[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++values[static_cast<std::size_t>(pos)];
  }
}

ExplicitDistribution enumerate_with(const ConditionalPredictor& predictor,
                                    const Selector& select, int d, int K,
                                    std::size_t cap) {
  ExplicitDistribution dist;
  dist.d = d;
  dist.K = K;
  dist.probs.assign(ExplicitDistribution::state_count(d, K, cap), 0.0);
  enumerate_recursive(predictor, select, MaskedSequence(Vocabulary(K), d), 1.0,
                      dist);
  return dist;
}

double kl_rows(const std::vector<double>& a, const std::vector<double>& b) {
  double kl = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] <= 0.0) continue;
    if (b[i] <= 0.0) return kInf;
    kl += a[i] * std::log(a[i] / b[i]);
  }
  return kl < 0.0 ? 0.0 : kl;
}

nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

std::size_t ExplicitDistribution::state_count(int d, int K, std::size_t cap) {
  if (d < 1 || K < 2)
    throw std::invalid_argument("ExplicitDistribution: need d >= 1, K >= 2");
  std::size_t n = 1;
  for (int i = 0; i < d; ++i) {
    if (n > cap / static_cast<std::size_t>(K))
      throw CapExceeded("state space K^d exceeds enumeration cap");
    n *= static_cast<std::size_t>(K);
  }
  return n;
}

std::size_t ExplicitDistribution::index_of(const std::vector<int>& state) const {
  std::size_t idx = 0;
  for (int t : state) idx = idx * static_cast<std::size_t>(K) + static_cast<std::size_t>(t);
  return idx;
}

std::vector<int> ExplicitDistribution::state_of(std::size_t index) const {
  std::vector<int> state(static_cast<std::size_t>(d), 0);
  for (int l = d - 1; l >= 0; --l) {
    state[static_cast<std::size_t>(l)] =
        static_cast<int>(index % static_cast<std::size_t>(K));
    index /= static_cast<std::size_t>(K);
  }
  return state;
}

double ExplicitDistribution::total() const {
  double t = 0.0;
  for (double p : probs) t += p;
  return t;
}

ExplicitDistribution to_explicit(const JointTable& joint, std::size_t cap) {
  ExplicitDistribution dist;
  dist.d = joint.d();
  dist.K = joint.K();
  dist.probs.assign(ExplicitDistribution::state_count(joint.d(), joint.K(), cap),
                    0.0);
  for (const auto& e : joint.support()) dist.probs[dist.index_of(e.state)] = e.prob;
  return dist;
}

void UnmaskingOrder::validate(int d) const {
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < d; ++i)
    if (static_cast<int>(sorted.size()) != d || sorted[static_cast<std::size_t>(i)] != i)
      throw std::invalid_argument("UnmaskingOrder: not a permutation of 0..d-1");
}

ExplicitDistribution enumerate_policy_distribution(
    const ConditionalPredictor& predictor, const SamplerPolicy& policy, int d,
    int K, std::size_t cap) {
  require_enumerable_policy(policy);
  return enumerate_with(predictor, policy_selector(policy), d, K, cap);
}

ExplicitDistribution enumerate_order_distribution(
    const ConditionalPredictor& predictor, const UnmaskingOrder& order, int d,
    int K, std::size_t cap) {
  order.validate(d);
  return enumerate_with(predictor, order_selector(order), d, K, cap);
}

DecompositionReport kl_decomposition(const JointTable& q,
                                     const ConditionalPredictor& predictor,
                                     const SamplerPolicy& policy) {
  require_enumerable_policy(policy);
  const int d = q.d();
  const int K = q.K();
  const Vocabulary vocab(K);
  const Selector select = policy_selector(policy);

  // Per-step contributions of every support state, reduced pairwise at the
  // end for a bit-stable result independent of traversal batching.
  std::vector<std::vector<double>> model_terms;
  std::vector<std::vector<double>> joint_terms;
  std::vector<std::vector<double>> total_terms;

  for (const auto& entry : q.support()) {
    MaskedSequence seq(vocab, d);
    int step_index = 0;
    while (!seq.fully_unmasked()) {
      const PredictionSet predicted = predictor.predict(seq);
      const std::vector<int> z = select(seq, predicted);
      const PredictionSet true_conditionals = q.exact_conditionals(seq);

      double model = 0.0;
      for (int l : z)
        model += kl_divergence(true_conditionals.at(l), predicted.at(l));

      const std::vector<double> block = q.conditional_joint(seq, z);
      std::vector<double> product(block.size(), 0.0);
      std::vector<int> values(z.size(), 0);
      for (std::size_t cell = 0; cell < block.size(); ++cell) {
        double pr = 1.0;
        std::size_t rest = cell;
        for (std::size_t j = z.size(); j-- > 0;) {
          values[j] = static_cast<int>(rest % static_cast<std::size_t>(K));
          rest /= static_cast<std::size_t>(K);
        }
        for (std::size_t j = 0; j < z.size(); ++j)
          pr *= true_conditionals.at(z[j]).prob(values[j]);
        product[cell] = pr;
      }
      const double joint_dep = kl_rows(block, product);

      // Realized-value route: ln q(x^{z} | evidence) - sum_l ln p(x^l | evidence).
      std::size_t realized_cell = 0;
      double realized_log_p = 0.0;
      StepPlan plan;
      plan.indices = z;
      for (int l : z) {
        const int v = entry.state[static_cast<std::size_t>(l)];
        plan.values.push_back(v);
        realized_cell = realized_cell * static_cast<std::size_t>(K) +
                        static_cast<std::size_t>(v);
        const double pl = predicted.at(l).prob(v);
        realized_log_p = pl > 0.0 ? realized_log_p + std::log(pl) : -kInf;
      }
      const double total = std::isinf(realized_log_p)
                               ? kInf
                               : std::log(block[realized_cell]) - realized_log_p;

      if (step_index >= static_cast<int>(model_terms.size())) {
        model_terms.emplace_back();
        joint_terms.emplace_back();
        total_terms.emplace_back();
      }
      model_terms[static_cast<std::size_t>(step_index)].push_back(entry.prob * model);
      joint_terms[static_cast<std::size_t>(step_index)].push_back(entry.prob *
                                                                  joint_dep);
      total_terms[static_cast<std::size_t>(step_index)].push_back(entry.prob *
                                                                  total);

      seq = apply_plan(seq, plan);
      ++step_index;
    }
  }

  DecompositionReport report;
  for (std::size_t i = 0; i < model_terms.size(); ++i) {
    StepErrors step;
    step.model_error = pairwise_sum(std::move(model_terms[i]));
    step.joint_dependence_error = pairwise_sum(std::move(joint_terms[i]));
    step.total_kl = pairwise_sum(std::move(total_terms[i]));
    report.model_error += step.model_error;
    report.joint_dependence_error += step.joint_dependence_error;
    report.total_kl += step.total_kl;
    report.per_step.push_back(step);
  }
  return report;
}

MiBound joint_dependence_mi(const JointTable& q, const MaskedSequence& evidence,
                            const std::vector<int>& subset) {
  if (subset.empty())
    throw std::invalid_argument("joint_dependence_mi: empty subset");
  const std::vector<double> block = q.conditional_joint(evidence, subset);
  const PredictionSet marginals = q.exact_conditionals(evidence);
  const int K = q.K();

  std::vector<double> product(block.size(), 0.0);
  std::vector<int> values(subset.size(), 0);
  for (std::size_t cell = 0; cell < block.size(); ++cell) {
    std::size_t rest = cell;
    for (std::size_t j = subset.size(); j-- > 0;) {
      values[j] = static_cast<int>(rest % static_cast<std::size_t>(K));
      rest /= static_cast<std::size_t>(K);
    }
    double pr = 1.0;
    for (std::size_t j = 0; j < subset.size(); ++j)
      pr *= marginals.at(subset[j]).prob(values[j]);
    product[cell] = pr;
  }

  MiBound out;
  out.mi = kl_rows(block, product);
  double sum_h = 0.0;
  double max_h = 0.0;
  for (int l : subset) {
    const double h = [&] {
      double acc = 0.0;
      for (double v : marginals.at(l).probs())
        if (v > 0.0) acc -= v * std::log(v);
      return acc;
    }();
    sum_h += h;
    if (h > max_h) max_h = h;
  }
  out.entropy_bound = sum_h - max_h;
  return out;
}

double order_total_error(const JointTable& q,
                         const ConditionalPredictor& predictor,
                         const UnmaskingOrder& order) {
  order.validate(q.d());
  const Vocabulary vocab(q.K());
  std::vector<double> terms;
  terms.reserve(q.support().size());
  for (const auto& entry : q.support()) {
    MaskedSequence seq(vocab, q.d());
    double log_p = 0.0;
    for (int l : order.order) {
      const PredictionSet preds = predictor.predict(seq);
      const double pl =
          preds.at(l).prob(entry.state[static_cast<std::size_t>(l)]);
      if (pl <= 0.0) return kInf;
      log_p += std::log(pl);
      StepPlan plan{{l}, {entry.state[static_cast<std::size_t>(l)]}};
      seq = apply_plan(seq, plan);
    }
    terms.push_back(entry.prob * (std::log(entry.prob) - log_p));
  }
  const double kl = pairwise_sum(std::move(terms));
  return kl < 0.0 ? 0.0 : kl;
}

double tv_distance(const ExplicitDistribution& a, const ExplicitDistribution& b) {
  if (a.d != b.d || a.K != b.K)
    throw SpaceMismatch("tv_distance: distributions over different spaces");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.probs.size(); ++i)
    acc += std::abs(a.probs[i] - b.probs[i]);
  return 0.5 * acc;
}

double kl_divergence(const ExplicitDistribution& a, const ExplicitDistribution& b) {
  if (a.d != b.d || a.K != b.K)
    throw SpaceMismatch("kl_divergence: distributions over different spaces");
  return kl_rows(a.probs, b.probs);
}

double kl_divergence(const Categorical& a, const Categorical& b) {
  if (a.size() != b.size())
    throw SpaceMismatch("kl_divergence: categorical sizes differ");
  return kl_rows(a.probs(), b.probs());
}

double kl_divergence(const JointTable& q, const ExplicitDistribution& p) {
  if (q.d() != p.d || q.K() != p.K)
    throw SpaceMismatch("kl_divergence: joint and distribution spaces differ");
  std::vector<double> terms;
  terms.reserve(q.support().size());
  for (const auto& e : q.support()) {
    const double pv = p.probs[p.index_of(e.state)];
    if (pv <= 0.0) return kInf;
    terms.push_back(e.prob * (std::log(e.prob) - std::log(pv)));
  }
  const double kl = pairwise_sum(std::move(terms));
  return kl < 0.0 ? 0.0 : kl;
}

double pairwise_sum(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::size_t n = values.size();
  while (n > 1) {
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i)
      values[i] = values[2 * i] + values[2 * i + 1];
    if (n % 2 == 1) {
      values[half] = values[n - 1];
      n = half + 1;
    } else {
      n = half;
    }
  }
  return values[0];
}

std::string DecompositionReport::to_json() const {
  nlohmann::json j;
  j["total_kl"] = json_number(total_kl);
  j["model_error"] = json_number(model_error);
  j["joint_dependence_error"] = json_number(joint_dependence_error);
  nlohmann::json steps = nlohmann::json::array();
  for (const StepErrors& s : per_step)
    steps.push_back({{"model_error", json_number(s.model_error)},
                     {"joint_dependence_error", json_number(s.joint_dependence_error)},
                     {"total_kl", json_number(s.total_kl)}});
  j["per_step"] = std::move(steps);
  return j.dump();
}

}  // namespace ebs
