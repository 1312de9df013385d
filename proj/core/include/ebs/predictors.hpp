#pragma once

#include <memory>

#include "ebs/joint_table.hpp"
#include "ebs/types.hpp"

namespace ebs {

/// Conditional predictor contract: given a partially masked sequence, return
/// one Categorical per masked index. Implementations must be deterministic
/// (identical inputs yield identical predictions) and safe for concurrent
/// queries after construction.
class ConditionalPredictor {
 public:
  virtual ~ConditionalPredictor() = default;
  virtual PredictionSet predict(const MaskedSequence& seq) const = 0;
};

/// Zero-model-error reference: true conditionals of an explicit joint.
class ExactOracle : public ConditionalPredictor {
 public:
  explicit ExactOracle(JointTable joint) : joint_(std::move(joint)) {}

  PredictionSet predict(const MaskedSequence& seq) const override {
    return joint_.exact_conditionals(seq);
  }

  const JointTable& joint() const { return joint_; }

 private:
  JointTable joint_;
};

/// Controlled-model-error predictor: mixes every exact conditional with the
/// uniform distribution, p = (1-eps) * q + eps * Uniform(K). eps = 0 is the
/// exact oracle; eps = 1 predicts uniform everywhere.
class PerturbedOracle : public ConditionalPredictor {
 public:
  PerturbedOracle(JointTable joint, double epsilon);

  PredictionSet predict(const MaskedSequence& seq) const override;

  double epsilon() const { return epsilon_; }
  const JointTable& joint() const { return joint_; }

 private:
  JointTable joint_;
  double epsilon_;
};

/// Validates that a PredictionSet covers exactly the masked indices of `seq`
/// with length-K rows; throws ProtocolViolation otherwise. Used to vet
/// externally supplied predictors.
void validate_predictions(const PredictionSet& preds, const MaskedSequence& seq);

/// Wrapper that validates every prediction from an untrusted inner predictor.
class ValidatingPredictor : public ConditionalPredictor {
 public:
  explicit ValidatingPredictor(std::shared_ptr<const ConditionalPredictor> inner)
      : inner_(std::move(inner)) {}

  PredictionSet predict(const MaskedSequence& seq) const override {
    PredictionSet preds = inner_->predict(seq);
    validate_predictions(preds, seq);
    return preds;
  }

 private:
  std::shared_ptr<const ConditionalPredictor> inner_;
};

}  // namespace ebs
