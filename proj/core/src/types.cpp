#include "ebs/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ebs {

Vocabulary::Vocabulary(int num_tokens) : size_(num_tokens) {
  if (num_tokens < 2)
    throw std::invalid_argument("Vocabulary: need at least 2 tokens");
}

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("Categorical: empty");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0))
      throw std::invalid_argument("Categorical: negative or NaN entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance)
    throw std::invalid_argument("Categorical: probabilities sum to " +
                                std::to_string(sum));
  for (double& p : probs_) p /= sum;
}

Categorical Categorical::uniform(int k) {
  return Categorical(std::vector<double>(static_cast<std::size_t>(k), 1.0 / k));
}

MaskedSequence::MaskedSequence(Vocabulary vocab, int length)
    : vocab_(vocab),
      tokens_(static_cast<std::size_t>(length), vocab.mask_id()) {
  if (length < 1) throw std::invalid_argument("MaskedSequence: length must be >= 1");
}

MaskedSequence::MaskedSequence(Vocabulary vocab, std::vector<int> tokens)
    : vocab_(vocab), tokens_(std::move(tokens)) {
  if (tokens_.empty())
    throw std::invalid_argument("MaskedSequence: length must be >= 1");
  for (int t : tokens_) {
    if (t != vocab_.mask_id() && (t < 0 || t >= vocab_.size()))
      throw ValueOutOfVocabulary("MaskedSequence: token " + std::to_string(t) +
                                 " outside vocabulary of size " +
                                 std::to_string(vocab_.size()));
  }
}

bool MaskedSequence::fully_unmasked() const {
  return std::none_of(tokens_.begin(), tokens_.end(),
                      [&](int t) { return t == vocab_.mask_id(); });
}

std::vector<int> MaskedSequence::masked_indices() const {
  std::vector<int> out;
  for (int i = 0; i < length(); ++i)
    if (is_masked(i)) out.push_back(i);
  return out;
}

std::vector<int> MaskedSequence::unmasked_indices() const {
  std::vector<int> out;
  for (int i = 0; i < length(); ++i)
    if (!is_masked(i)) out.push_back(i);
  return out;
}

void PredictionSet::insert(int index, Categorical p) {
  entries_.insert_or_assign(index, std::move(p));
}

const Categorical& PredictionSet::at(int index) const {
  auto it = entries_.find(index);
  if (it == entries_.end())
    throw std::out_of_range("PredictionSet: no entry for index " +
                            std::to_string(index));
  return it->second;
}

MaskedSequence apply_plan(const MaskedSequence& seq, const StepPlan& plan) {
  if (plan.indices.size() != plan.values.size())
    throw std::invalid_argument("apply_plan: indices/values length mismatch");
  std::vector<int> tokens = seq.tokens();
  const Vocabulary& vocab = seq.vocabulary();
  for (std::size_t i = 0; i < plan.indices.size(); ++i) {
    const int index = plan.indices[i];
    const int value = plan.values[i];
    if (index < 0 || index >= seq.length())
      throw std::out_of_range("apply_plan: index out of range");
    // Checked against the working copy so duplicate plan indices also fail.
    if (tokens[static_cast<std::size_t>(index)] != vocab.mask_id())
      throw PlanTargetsUnmasked("apply_plan: index " + std::to_string(index) +
                                " is already unmasked");
    if (value < 0 || value >= vocab.size())
      throw ValueOutOfVocabulary("apply_plan: value " + std::to_string(value) +
                                 " outside vocabulary");
    tokens[static_cast<std::size_t>(index)] = value;
  }
  return MaskedSequence(vocab, std::move(tokens));
}

std::vector<int> masked_indices(const MaskedSequence& seq) {
  return seq.masked_indices();
}

bool OrderedPartition::covers(const std::vector<int>& universe) const {
  std::vector<int> all;
  for (const auto& part : parts) all.insert(all.end(), part.begin(), part.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) return false;
  std::vector<int> want = universe;
  std::sort(want.begin(), want.end());
  return all == want;
}

}  // namespace ebs
