#include "ebs/proxies.hpp"

#include <cmath>
#include <stdexcept>

namespace ebs {

ProxyKind parse_proxy_kind(const std::string& name) {
  if (name == "confidence") return ProxyKind::Confidence;
  if (name == "entropy") return ProxyKind::Entropy;
  if (name == "margin") return ProxyKind::Margin;
  throw ConfigError("unknown proxy kind: " + name);
}

std::string proxy_kind_name(ProxyKind kind) {
  switch (kind) {
    case ProxyKind::Confidence: return "confidence";
    case ProxyKind::Entropy: return "entropy";
    case ProxyKind::Margin: return "margin";
  }
  throw std::logic_error("proxy_kind_name: invalid enum value");
}

double entropy(const Categorical& p) {
  double h = 0.0;
  for (double v : p.probs())
    if (v > 0.0) h -= v * std::log(v);
  return h < 0.0 ? 0.0 : h;  // clamp -0.0 from rounding
}

double error_score(const Categorical& p, ProxyKind kind) {
  switch (kind) {
    case ProxyKind::Entropy:
      return entropy(p);
    case ProxyKind::Confidence: {
      double best = 0.0;
      for (double v : p.probs())
        if (v > best) best = v;
      return -best;
    }
    case ProxyKind::Margin: {
      double top1 = 0.0, top2 = 0.0;
      for (double v : p.probs()) {
        if (v > top1) {
          top2 = top1;
          top1 = v;
        } else if (v > top2) {
          top2 = v;
        }
      }
      return -(top1 - top2);
    }
  }
  throw std::logic_error("error_score: invalid enum value");
}

std::map<int, double> score_predictions(const PredictionSet& preds,
                                        ProxyKind kind) {
  std::map<int, double> scores;
  for (const auto& [index, p] : preds) scores.emplace(index, error_score(p, kind));
  return scores;
}

}  // namespace ebs
