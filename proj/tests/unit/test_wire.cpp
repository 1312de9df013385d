#include <string>

#include "doctest.h"

#include <ebs/joint_table.hpp>
#include <ebs/wire.hpp>

using namespace ebs;

namespace {

MaskedSequence request_seq() {
  const Vocabulary vocab(3);
  return MaskedSequence(vocab, {vocab.mask_id(), 2, vocab.mask_id()});
}

}  // namespace

TEST_SUITE("wire") {

TEST_CASE("request encoding") {
  const std::string line = encode_request(request_seq());
  CHECK(line.back() == '\n');
  CHECK(line.find("\"type\":\"predict\"") != std::string::npos);
  CHECK(line.find("\"tokens\":[-1,2,-1]") != std::string::npos);
  CHECK(line.find("\"masked\":[0,2]") != std::string::npos);
  CHECK(line.find("\"K\":3") != std::string::npos);
}

TEST_CASE("response decoding round-trips the semantic content") {
  const MaskedSequence seq = request_seq();
  const PredictionSet preds = decode_response(
      R"({"type":"probs","probs":{"0":[0.2,0.3,0.5],"2":[1,0,0]}})", seq);
  CHECK(preds.size() == 2);
  CHECK(preds.at(0).prob(2) == doctest::Approx(0.5));
  CHECK(preds.at(2).prob(0) == doctest::Approx(1.0));
}

TEST_CASE("protocol violations") {
  const MaskedSequence seq = request_seq();
  SUBCASE("missing index") {
    CHECK_THROWS_AS(
        decode_response(R"({"type":"probs","probs":{"0":[0.2,0.3,0.5]}})", seq),
        ProtocolViolation);
  }
  SUBCASE("wrong row length") {
    CHECK_THROWS_AS(
        decode_response(
            R"({"type":"probs","probs":{"0":[0.5,0.5],"2":[1,0,0]}})", seq),
        ProtocolViolation);
  }
  SUBCASE("row off normalization tolerance") {
    CHECK_THROWS_AS(
        decode_response(
            R"({"type":"probs","probs":{"0":[0.2,0.3,0.4],"2":[1,0,0]}})", seq),
        ProtocolViolation);
  }
  SUBCASE("negative entry") {
    CHECK_THROWS_AS(
        decode_response(
            R"({"type":"probs","probs":{"0":[-0.1,0.6,0.5],"2":[1,0,0]}})", seq),
        ProtocolViolation);
  }
  SUBCASE("malformed frame") {
    CHECK_THROWS_AS(decode_response("not json at all", seq), ProtocolViolation);
  }
  SUBCASE("error response surfaces its message") {
    CHECK_THROWS_WITH_AS(
        decode_response(R"({"type":"error","message":"backend gone"})", seq),
        doctest::Contains("backend gone"), ProtocolViolation);
  }
  SUBCASE("unexpected type") {
    CHECK_THROWS_AS(decode_response(R"({"type":"tokens"})", seq),
                    ProtocolViolation);
  }
  SUBCASE("extra index beyond the masked set") {
    CHECK_THROWS_AS(
        decode_response(
            R"({"type":"probs","probs":{"0":[0.2,0.3,0.5],"1":[1,0,0],"2":[1,0,0]}})",
            seq),
        ProtocolViolation);
  }
}

TEST_CASE("subprocess predictor round-trip through the stub") {
  ExternalPredictorConfig config;
  config.command = {EBS_STUB_PREDICTOR_PATH};
  config.vocab_size = 3;
  const ExternalPredictor predictor(config);
  for (int i = 0; i < 5; ++i) {
    const PredictionSet preds = predictor.predict(request_seq());
    CHECK(preds.size() == 2);
    CHECK(preds.at(0).prob(1) == doctest::Approx(1.0 / 3));
  }
}

TEST_CASE("subprocess misbehaviors surface as protocol violations") {
  auto run_mode = [](const std::string& mode) {
    ExternalPredictorConfig config;
    config.command = {EBS_STUB_PREDICTOR_PATH, "--misbehave", mode};
    config.vocab_size = 3;
    const ExternalPredictor predictor(config);
    predictor.predict(request_seq());
  };
  CHECK_THROWS_AS(run_mode("missing-index"), ProtocolViolation);
  CHECK_THROWS_AS(run_mode("short-row"), ProtocolViolation);
  CHECK_THROWS_AS(run_mode("denormalized"), ProtocolViolation);
  CHECK_THROWS_AS(run_mode("error"), ProtocolViolation);
  CHECK_THROWS_AS(run_mode("garbage"), ProtocolViolation);
}

TEST_CASE("dead endpoint times out or closes") {
  ExternalPredictorConfig config;
  config.command = {"/bin/true"};  // exits immediately, never answers
  config.timeout_ms = 1'000;
  const ExternalPredictor predictor(config);
  CHECK_THROWS_AS(predictor.predict(request_seq()), ProtocolViolation);
}

}  // TEST_SUITE
