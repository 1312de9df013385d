#pragma once

// Predictor wrappers and doubles shared by the test suites.

#include <atomic>
#include <functional>
#include <memory>
#include <utility>

#include <ebs/predictors.hpp>
#include <ebs/types.hpp>

namespace ebs::testing {

/// Counts predictor evaluations, for cross-checking NFE accounting.
class CountingPredictor : public ConditionalPredictor {
 public:
  explicit CountingPredictor(const ConditionalPredictor& inner) : inner_(inner) {}

  PredictionSet predict(const MaskedSequence& seq) const override {
    ++calls_;
    return inner_.predict(seq);
  }

  int calls() const { return calls_.load(); }

 private:
  const ConditionalPredictor& inner_;
  mutable std::atomic<int> calls_{0};
};

/// Applies an arbitrary transform to another predictor's output.
class TransformPredictor : public ConditionalPredictor {
 public:
  using Transform =
      std::function<PredictionSet(const MaskedSequence&, PredictionSet)>;

  TransformPredictor(std::shared_ptr<const ConditionalPredictor> inner,
                     Transform transform)
      : inner_(std::move(inner)), transform_(std::move(transform)) {}

  PredictionSet predict(const MaskedSequence& seq) const override {
    return transform_(seq, inner_->predict(seq));
  }

 private:
  std::shared_ptr<const ConditionalPredictor> inner_;
  Transform transform_;
};

}  // namespace ebs::testing
