#include "ebs/joint_table.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ebs {

namespace {

bool state_matches_evidence(const std::vector<int>& state,
                            const MaskedSequence& seq) {
  for (int i = 0; i < seq.length(); ++i)
    if (!seq.is_masked(i) && state[static_cast<std::size_t>(i)] != seq.token(i))
      return false;
  return true;
}

}  // namespace

JointTable::JointTable(int d, int K, std::vector<Entry> support, std::size_t cap)
    : d_(d), K_(K), support_(std::move(support)) {
  if (d < 1) throw std::invalid_argument("JointTable: d must be >= 1");
  if (K < 2) throw std::invalid_argument("JointTable: K must be >= 2");
  if (support_.size() > cap)
    throw CapExceeded("JointTable: support size " +
                      std::to_string(support_.size()) + " exceeds cap " +
                      std::to_string(cap));
  double sum = 0.0;
  std::set<std::vector<int>> seen;
  for (auto& e : support_) {
    if (static_cast<int>(e.state.size()) != d)
      throw std::invalid_argument("JointTable: state length mismatch");
    for (int t : e.state)
      if (t < 0 || t >= K)
        throw std::invalid_argument("JointTable: state entry outside vocabulary");
    if (!(e.prob > 0.0))
      throw std::invalid_argument("JointTable: support probabilities must be positive");
    if (!seen.insert(e.state).second)
      throw std::invalid_argument("JointTable: duplicate support state");
    sum += e.prob;
  }
  if (std::abs(sum - 1.0) > Categorical::kNormalizationTolerance)
    throw std::invalid_argument("JointTable: probabilities sum to " +
                                std::to_string(sum));
  for (auto& e : support_) e.prob /= sum;
}

double JointTable::prob(const std::vector<int>& state) const {
  for (const auto& e : support_)
    if (e.state == state) return e.prob;
  return 0.0;
}

PredictionSet JointTable::exact_conditionals(const MaskedSequence& seq) const {
  if (seq.length() != d_)
    throw std::invalid_argument("exact_conditionals: sequence length mismatch");
  const std::vector<int> masked = seq.masked_indices();
  std::vector<std::vector<double>> sums(
      masked.size(), std::vector<double>(static_cast<std::size_t>(K_), 0.0));
  double evidence_mass = 0.0;
  for (const auto& e : support_) {
    if (!state_matches_evidence(e.state, seq)) continue;
    evidence_mass += e.prob;
    for (std::size_t m = 0; m < masked.size(); ++m)
      sums[m][static_cast<std::size_t>(
          e.state[static_cast<std::size_t>(masked[m])])] += e.prob;
  }
  if (evidence_mass <= 0.0)
    throw InconsistentEvidence(
        "exact_conditionals: no support state matches the unmasked positions");
  PredictionSet preds;
  for (std::size_t m = 0; m < masked.size(); ++m) {
    for (double& v : sums[m]) v /= evidence_mass;
    preds.insert(masked[m], Categorical(std::move(sums[m])));
  }
  return preds;
}

std::vector<double> JointTable::conditional_joint(
    const MaskedSequence& evidence, const std::vector<int>& subset) const {
  if (evidence.length() != d_)
    throw std::invalid_argument("conditional_joint: sequence length mismatch");
  for (int l : subset)
    if (!evidence.is_masked(l))
      throw std::invalid_argument("conditional_joint: subset index not masked");
  std::size_t cells = 1;
  for (std::size_t i = 0; i < subset.size(); ++i)
    cells *= static_cast<std::size_t>(K_);
  std::vector<double> table(cells, 0.0);
  double evidence_mass = 0.0;
  for (const auto& e : support_) {
    if (!state_matches_evidence(e.state, evidence)) continue;
    evidence_mass += e.prob;
    std::size_t idx = 0;
    for (int l : subset)
      idx = idx * static_cast<std::size_t>(K_) +
            static_cast<std::size_t>(e.state[static_cast<std::size_t>(l)]);
    table[idx] += e.prob;
  }
  if (evidence_mass <= 0.0)
    throw InconsistentEvidence(
        "conditional_joint: no support state matches the unmasked positions");
  for (double& v : table) v /= evidence_mass;
  return table;
}

std::string JointTable::to_json() const {
  nlohmann::json j;
  j["d"] = d_;
  j["K"] = K_;
  nlohmann::json support = nlohmann::json::array();
  for (const auto& e : support_)
    support.push_back({{"x", e.state}, {"p", e.prob}});
  j["support"] = std::move(support);
  return j.dump();
}

JointTable JointTable::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("JointTable: malformed JSON: ") + ex.what());
  }
  if (!j.is_object() || !j.contains("d") || !j.contains("K") ||
      !j.contains("support"))
    throw ConfigError("JointTable: expected object with d, K, support");
  std::vector<Entry> support;
  for (const auto& e : j.at("support"))
    support.push_back({e.at("x").get<std::vector<int>>(), e.at("p").get<double>()});
  return JointTable(j.at("d").get<int>(), j.at("K").get<int>(), std::move(support));
}

void JointTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("JointTable: cannot open " + path + " for writing");
  out << to_json() << "\n";
}

JointTable JointTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("JointTable: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace ebs
