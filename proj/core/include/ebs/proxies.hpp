#pragma once

#include <map>
#include <string>

#include "ebs/types.hpp"

namespace ebs {

/// Per-position score used to order unmasking. All three are expressed as
/// ascending error scores: smaller score means unmask sooner.
enum class ProxyKind { Confidence, Entropy, Margin };

ProxyKind parse_proxy_kind(const std::string& name);  // confidence|entropy|margin
std::string proxy_kind_name(ProxyKind kind);

/// Shannon entropy in nats, with 0 * ln 0 == 0. Result lies in [0, ln K].
double entropy(const Categorical& p);

/// Confidence -> -max p; Entropy -> H(p); Margin -> -(p(y1) - p(y2)) with
/// (y1, y2) the two largest probability values. Ties in the margin top-2
/// yield exactly 0.
double error_score(const Categorical& p, ProxyKind kind);

/// One score per masked index.
std::map<int, double> score_predictions(const PredictionSet& preds,
                                        ProxyKind kind);

}  // namespace ebs
