#include "ebs/predictors.hpp"

#include <string>

namespace ebs {

PerturbedOracle::PerturbedOracle(JointTable joint, double epsilon)
    : joint_(std::move(joint)), epsilon_(epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("PerturbedOracle: epsilon must lie in [0, 1]");
}

PredictionSet PerturbedOracle::predict(const MaskedSequence& seq) const {
  PredictionSet exact = joint_.exact_conditionals(seq);
  if (epsilon_ == 0.0) return exact;
  const int K = joint_.K();
  PredictionSet mixed;
  for (const auto& [index, p] : exact) {
    std::vector<double> probs(static_cast<std::size_t>(K));
    for (int v = 0; v < K; ++v)
      probs[static_cast<std::size_t>(v)] =
          (1.0 - epsilon_) * p.prob(v) + epsilon_ / K;
    mixed.insert(index, Categorical(std::move(probs)));
  }
  return mixed;
}

void validate_predictions(const PredictionSet& preds, const MaskedSequence& seq) {
  const std::vector<int> masked = seq.masked_indices();
  if (preds.size() != static_cast<int>(masked.size()))
    throw ProtocolViolation("predictions cover " + std::to_string(preds.size()) +
                            " indices, expected " +
                            std::to_string(masked.size()));
  const int K = seq.vocabulary().size();
  for (int l : masked) {
    if (!preds.contains(l))
      throw ProtocolViolation("prediction missing for masked index " +
                              std::to_string(l));
    if (preds.at(l).size() != K)
      throw ProtocolViolation("prediction row for index " + std::to_string(l) +
                              " has length " + std::to_string(preds.at(l).size()) +
                              ", expected " + std::to_string(K));
  }
}

}  // namespace ebs
