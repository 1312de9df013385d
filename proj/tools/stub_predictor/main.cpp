// Reference predictor speaking the line-delimited JSON protocol on stdin and
// stdout. Serves uniform rows by default, or exact conditionals of a joint
// table given --table. The --misbehave modes violate the protocol on purpose
// and exist for conformance testing.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include <ebs/joint_table.hpp>
#include <ebs/types.hpp>

namespace {

using nlohmann::json;

json uniform_row(int k) {
  json row = json::array();
  for (int i = 0; i < k; ++i) row.push_back(1.0 / k);
  return row;
}

json error_response(const std::string& message) {
  return json{{"type", "error"}, {"message", message}};
}

struct Options {
  std::string table_path;
  std::string misbehave;  // missing-index | short-row | denormalized | error | garbage
};

json handle_request(const json& request, const Options& opts,
                    const std::optional<ebs::JointTable>& table) {
  if (!request.is_object() || request.value("type", std::string()) != "predict")
    return error_response("expected a predict request");
  const auto tokens = request.at("tokens").get<std::vector<int>>();
  const auto masked = request.at("masked").get<std::vector<int>>();
  const int k = request.at("K").get<int>();
  if (k < 2) return error_response("K must be >= 2");

  if (opts.misbehave == "error") return error_response("induced failure");

  json probs = json::object();
  if (table) {
    if (table->K() != k || table->d() != static_cast<int>(tokens.size()))
      return error_response("request does not match the joint table shape");
    std::vector<int> decoded = tokens;
    const ebs::Vocabulary vocab(k);
    for (int& t : decoded)
      if (t == -1) t = vocab.mask_id();
    try {
      const ebs::MaskedSequence seq(vocab, std::move(decoded));
      const ebs::PredictionSet preds = table->exact_conditionals(seq);
      for (const auto& [index, p] : preds)
        probs[std::to_string(index)] = p.probs();
    } catch (const std::exception& ex) {
      return error_response(ex.what());
    }
  } else {
    for (int index : masked) probs[std::to_string(index)] = uniform_row(k);
  }

  if (opts.misbehave == "missing-index" && !masked.empty())
    probs.erase(std::to_string(masked.back()));
  if (opts.misbehave == "short-row" && !masked.empty()) {
    json row = json::array();
    for (int i = 0; i + 1 < k; ++i) row.push_back(1.0 / (k - 1));
    probs[std::to_string(masked.front())] = std::move(row);
  }
  if (opts.misbehave == "denormalized" && !masked.empty()) {
    json row = json::array();
    for (int i = 0; i < k; ++i) row.push_back(0.9 / k);
    probs[std::to_string(masked.front())] = std::move(row);
  }

  return json{{"type", "probs"}, {"probs", std::move(probs)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"line-delimited JSON stub predictor"};
  Options opts;
  app.add_option("--table", opts.table_path,
                 "serve exact conditionals of this joint table file");
  app.add_option("--misbehave", opts.misbehave,
                 "protocol violation mode: missing-index, short-row, "
                 "denormalized, error, garbage")
      ->check(CLI::IsMember(
          {"", "missing-index", "short-row", "denormalized", "error", "garbage"}));
  CLI11_PARSE(app, argc, argv);

  std::optional<ebs::JointTable> table;
  if (!opts.table_path.empty()) {
    try {
      table = ebs::JointTable::load(opts.table_path);
    } catch (const std::exception& ex) {
      std::cerr << "stub predictor: " << ex.what() << "\n";
      return 2;
    }
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    if (opts.misbehave == "garbage") {
      std::cout << "this is not json\n" << std::flush;
      continue;
    }
    json request = json::parse(line, nullptr, false);
    json response = request.is_discarded()
                        ? error_response("malformed request")
                        : handle_request(request, opts, table);
    std::cout << response.dump() << "\n" << std::flush;
  }
  return 0;
}
