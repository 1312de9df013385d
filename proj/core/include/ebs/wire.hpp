#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ebs/predictors.hpp"
#include "ebs/types.hpp"

namespace ebs {

// Line-delimited JSON predictor protocol: one UTF-8 JSON object per line in
// each direction, over a byte stream (subprocess standard I/O here).
//
//   request:  {"type":"predict","tokens":[int,...],"masked":[int,...],"K":int}
//   response: {"type":"probs","probs":{"<index>":[float x K],...}}
//   error:    {"type":"error","message":str}
//
// Masked positions are encoded as -1 in `tokens`. A response must cover
// exactly the masked indices of the request with length-K rows summing to 1
// within 1e-9; anything else is a ProtocolViolation.

/// One request line, newline-terminated.
std::string encode_request(const MaskedSequence& seq);

/// Parses and validates one response line against the masked indices and
/// vocabulary size of the request's sequence. Throws ProtocolViolation on
/// malformed frames, coverage gaps, wrong row lengths, negative entries,
/// rows off normalization tolerance, and explicit error responses.
PredictionSet decode_response(const std::string& line, const MaskedSequence& seq);

struct ExternalPredictorConfig {
  std::vector<std::string> command;  // argv of the predictor subprocess
  int timeout_ms = 10'000;
  int vocab_size = 0;  // validated against every queried sequence
};

/// Predictor served by a subprocess speaking the protocol above on its
/// standard streams. One request is in flight at a time per instance;
/// concurrent workers should each own an instance.
class ExternalPredictor : public ConditionalPredictor {
 public:
  explicit ExternalPredictor(ExternalPredictorConfig config);
  ~ExternalPredictor() override;

  ExternalPredictor(const ExternalPredictor&) = delete;
  ExternalPredictor& operator=(const ExternalPredictor&) = delete;

  PredictionSet predict(const MaskedSequence& seq) const override;

 private:
  struct Process;
  ExternalPredictorConfig config_;
  std::unique_ptr<Process> process_;
};

}  // namespace ebs
