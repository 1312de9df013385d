#include "ebs/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ebs {

SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "random") return SamplerKind::Random;
  if (name == "topk") return SamplerKind::TopK;
  if (name == "eb") return SamplerKind::EB;
  throw ConfigError("unknown sampler kind: " + name);
}

std::string sampler_kind_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Random: return "random";
    case SamplerKind::TopK: return "topk";
    case SamplerKind::EB: return "eb";
  }
  throw std::logic_error("sampler_kind_name: invalid enum value");
}

void SamplerPolicy::validate() const {
  if (kind == SamplerKind::TopK && k < 1)
    throw ConfigError("SamplerPolicy: k must be >= 1");
  if (kind == SamplerKind::EB && !(gamma >= 0.0))
    throw ConfigError("SamplerPolicy: gamma must be >= 0 or infinity");
  if (!(temperature >= 0.0))
    throw ConfigError("SamplerPolicy: temperature must be >= 0");
}

SamplerPolicy SamplerPolicy::random_unmasking(double temperature) {
  SamplerPolicy p;
  p.kind = SamplerKind::Random;
  p.temperature = temperature;
  return p;
}

SamplerPolicy SamplerPolicy::topk(int k, ProxyKind proxy, double temperature) {
  SamplerPolicy p;
  p.kind = SamplerKind::TopK;
  p.k = k;
  p.proxy = proxy;
  p.temperature = temperature;
  return p;
}

SamplerPolicy SamplerPolicy::eb(double gamma, ProxyKind proxy, double temperature) {
  SamplerPolicy p;
  p.kind = SamplerKind::EB;
  p.gamma = gamma;
  p.proxy = proxy;
  p.temperature = temperature;
  return p;
}

int eb_select(const std::vector<double>& entropies_in_proxy_order, double gamma) {
  if (entropies_in_proxy_order.empty())
    throw EmptyInput("eb_select: empty entropy list");
  int k = 0;
  double cumsum = 0.0;
  double cummax = 0.0;
  for (double h : entropies_in_proxy_order) {
    cumsum += h;
    if (h > cummax) cummax = h;
    if (cumsum - cummax <= gamma) ++k;
  }
  return k < 1 ? 1 : k;
}

int draw_token(const Categorical& p, double temperature, RngStream& rng) {
  if (!(temperature >= 0.0))
    throw std::invalid_argument("draw_token: temperature must be >= 0");
  const std::vector<double>& probs = p.probs();
  if (temperature == 0.0) {
    int best = 0;
    for (int i = 1; i < p.size(); ++i)
      if (probs[static_cast<std::size_t>(i)] >
          probs[static_cast<std::size_t>(best)])
        best = i;  // strict > keeps the lowest index on ties
    return best;
  }
  std::vector<double> weights;
  if (temperature == 1.0) {
    weights = probs;
  } else {
    weights.resize(probs.size());
    double sum = 0.0;
    const double inv_t = 1.0 / temperature;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      weights[i] = probs[i] > 0.0 ? std::pow(probs[i], inv_t) : 0.0;
      sum += weights[i];
    }
    for (double& w : weights) w /= sum;
  }
  const double u = rng.next_unit();
  double cum = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += weights[i];
    if (u < cum) return static_cast<int>(i);
  }
  return last_positive;  // rounding left cum fractionally below 1
}

std::vector<int> select_unmask_indices(const PredictionSet& preds,
                                       const SamplerPolicy& policy,
                                       const std::vector<int>& candidates) {
  if (!policy.deterministic_selection())
    throw std::invalid_argument(
        "select_unmask_indices: random unmasking has no deterministic selection");
  if (candidates.empty())
    throw EmptyInput("select_unmask_indices: no candidates");

  struct Scored {
    double score;
    int index;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (int l : candidates)
    scored.push_back({error_score(preds.at(l), policy.proxy), l});
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.index < b.index;  // fixed tie-break for reproducibility
  });

  std::size_t take = 0;
  if (policy.kind == SamplerKind::TopK) {
    take = std::min<std::size_t>(static_cast<std::size_t>(policy.k),
                                 scored.size());
  } else {
    std::vector<double> entropies;
    entropies.reserve(scored.size());
    for (const Scored& s : scored) entropies.push_back(entropy(preds.at(s.index)));
    take = std::min<std::size_t>(
        static_cast<std::size_t>(eb_select(entropies, policy.gamma)),
        scored.size());
  }
  std::vector<int> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].index);
  return out;
}

StepPlan step(const ConditionalPredictor& predictor, const MaskedSequence& seq,
              const SamplerPolicy& policy, IndexRange region, RngStream& rng) {
  if (region.begin < 0 || region.end > seq.length() ||
      region.begin >= region.end)
    throw std::invalid_argument("step: invalid region");
  std::vector<int> candidates;
  for (int i = region.begin; i < region.end; ++i)
    if (seq.is_masked(i)) candidates.push_back(i);
  if (candidates.empty())
    throw NothingToUnmask("step: region is fully unmasked");

  const PredictionSet preds = predictor.predict(seq);

  StepPlan plan;
  if (policy.kind == SamplerKind::Random) {
    const int idx =
        candidates[static_cast<std::size_t>(rng.next_below(
            static_cast<int>(candidates.size())))];
    plan.indices.push_back(idx);
    plan.values.push_back(draw_token(preds.at(idx), policy.temperature, rng));
    return plan;
  }

  plan.indices = select_unmask_indices(preds, policy, candidates);
  plan.values.reserve(plan.indices.size());
  // All values come from this one predictor evaluation; tokens of a
  // multi-index plan are drawn independently.
  for (int l : plan.indices)
    plan.values.push_back(draw_token(preds.at(l), policy.temperature, rng));
  return plan;
}

bool stop_satisfied(const MaskedSequence& seq, const std::vector<int>& marker,
                    IndexRange region) {
  if (marker.empty()) throw EmptyInput("stop_satisfied: empty marker");
  const int m = static_cast<int>(marker.size());
  // Any occurrence must end before the first masked region index, since every
  // region position preceding the marker end has to be unmasked.
  int prefix_end = region.end;
  for (int i = region.begin; i < region.end; ++i) {
    if (seq.is_masked(i)) {
      prefix_end = i;
      break;
    }
  }
  for (int s = region.begin; s + m <= prefix_end; ++s) {
    bool match = true;
    for (int j = 0; j < m; ++j) {
      if (seq.token(s + j) != marker[static_cast<std::size_t>(j)]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

GenerationConfig GenerationConfig::resolved(int d) const {
  GenerationConfig out = *this;
  if (!out.region) out.region = IndexRange{0, d};
  const IndexRange r = *out.region;
  if (r.begin < 0 || r.end > d || r.begin >= r.end)
    throw ConfigError("GenerationConfig: region outside [0, d)");
  if (out.block_len && (*out.block_len < 1 || *out.block_len > r.length()))
    throw ConfigError("GenerationConfig: block_len must be in [1, region length]");
  if (out.stop_marker && out.stop_marker->empty())
    throw ConfigError("GenerationConfig: stop marker must be non-empty");
  if (out.max_steps == 0) out.max_steps = r.length();
  if (out.max_steps < 1)
    throw ConfigError("GenerationConfig: max_steps must be >= 1");
  return out;
}

namespace {

IndexRange active_block(const MaskedSequence& seq, IndexRange region,
                        int block_len) {
  int first_masked = -1;
  for (int i = region.begin; i < region.end; ++i) {
    if (seq.is_masked(i)) {
      first_masked = i;
      break;
    }
  }
  if (first_masked < 0) return region;  // caller breaks before using this
  const int b = (first_masked - region.begin) / block_len;
  return IndexRange{region.begin + b * block_len,
                    std::min(region.begin + (b + 1) * block_len, region.end)};
}

}  // namespace

GenerationResult generate(const ConditionalPredictor& predictor,
                          const MaskedSequence& initial,
                          const SamplerPolicy& policy,
                          const GenerationConfig& config, RngStream& rng) {
  policy.validate();
  const GenerationConfig cfg = config.resolved(initial.length());
  const IndexRange region = *cfg.region;
  if (cfg.stop_marker) {
    for (int t : *cfg.stop_marker)
      if (t < 0 || t >= initial.vocabulary().size())
        throw ConfigError("generate: stop marker token outside vocabulary");
  }

  MaskedSequence seq = initial;
  OrderedPartition partition;
  TrajectoryStats stats;

  auto region_has_masks = [&](const MaskedSequence& s) {
    for (int i = region.begin; i < region.end; ++i)
      if (s.is_masked(i)) return true;
    return false;
  };

  if (!region_has_masks(seq))
    throw NothingToUnmask("generate: no masked index within the region");

  bool stopped_by_marker = false;
  while (region_has_masks(seq)) {
    if (stats.nfe >= cfg.max_steps)
      throw StallDetected("generate: max_steps reached with masks remaining");
    IndexRange candidates = region;
    if (cfg.block_len)
      candidates = active_block(seq, region, *cfg.block_len);
    StepPlan plan = step(predictor, seq, policy, candidates, rng);
    seq = apply_plan(seq, plan);
    ++stats.nfe;
    stats.per_step_counts.push_back(plan.size());
    partition.parts.push_back(plan.indices);
    if (cfg.stop_marker && stop_satisfied(seq, *cfg.stop_marker, region)) {
      stopped_by_marker = true;
      break;
    }
  }

  // generate_until accounting, recomputed as a post-process replay over the
  // recorded plans.
  stats.effective_nfe = stats.nfe;
  stats.answer_len = region.length();
  if (cfg.stop_marker) {
    MaskedSequence replay = initial;
    for (int i = 0; i < stats.nfe; ++i) {
      StepPlan plan;
      plan.indices = partition.parts[static_cast<std::size_t>(i)];
      for (int l : plan.indices) plan.values.push_back(seq.token(l));
      replay = apply_plan(replay, plan);
      if (stop_satisfied(replay, *cfg.stop_marker, region)) {
        stats.effective_nfe = i + 1;
        break;
      }
    }
    if (stopped_by_marker) {
      const int m = static_cast<int>(cfg.stop_marker->size());
      for (int s = region.begin; s + m <= region.end; ++s) {
        bool match = true;
        for (int j = 0; j < m; ++j) {
          if (seq.token(s + j) != (*cfg.stop_marker)[static_cast<std::size_t>(j)]) {
            match = false;
            break;
          }
        }
        if (match) {
          stats.answer_len = s + m - region.begin;
          break;
        }
      }
    }
  }

  return GenerationResult{std::move(seq), std::move(partition), std::move(stats)};
}

}  // namespace ebs
