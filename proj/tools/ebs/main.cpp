// Sweep harness and verification CLI.
//
//   ebs sweep    — run a sampler x proxy x parameter grid over a task and
//                  emit accuracy/NFE records as CSV or JSON
//   ebs verify   — run the randomized exact-identity suite, print a JSON
//                  report, exit nonzero on any failure
//   ebs gen-task — write a task's joint table to a file
//
// Exit codes: 0 success, 1 verification failure, 2 config error,
// 3 predictor/protocol error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include <ebs/errors.hpp>
#include <ebs/sweep.hpp>
#include <ebs/tasks.hpp>
#include <ebs/verify.hpp>

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitProtocolError = 3;

struct SweepFlags {
  std::string config_path;
  std::string task;
  int d = -1;
  int K = -1;
  double markov_stay = -1.0;
  std::string sampler;
  std::vector<std::string> proxies;
  std::vector<std::string> gammas;
  std::vector<int> ks;
  double temperature = -1.0;
  std::string predictor;
  double epsilon = -1.0;
  std::vector<std::string> predictor_cmd;
  std::vector<std::uint64_t> seeds;
  int n_puzzles = -1;
  int n_given = -1;
  int block_len = -1;
  std::vector<int> stop_marker;
  std::string out;
  std::string format;
  int workers = 0;
};

json markov_patch(int d, int K, double stay) {
  json transition = json::array();
  for (int i = 0; i < K; ++i) {
    json row = json::array();
    for (int j = 0; j < K; ++j)
      row.push_back(i == j ? stay : (1.0 - stay) / (K - 1));
    transition.push_back(std::move(row));
  }
  json initial = json::array();
  for (int i = 0; i < K; ++i) initial.push_back(1.0 / K);
  return json{{"name", "markov_chain"},
              {"d", d},
              {"transition", std::move(transition)},
              {"initial", std::move(initial)}};
}

json task_patch(const std::string& name, int d, int K, double markov_stay) {
  if (name == "markov_chain") {
    const int kk = K > 0 ? K : 3;
    const int dd = d > 0 ? d : 8;
    const double stay = markov_stay >= 0.0 ? markov_stay : 0.6;
    return markov_patch(dd, kk, stay);
  }
  json t{{"name", name}};
  if (d > 0) t["d"] = d;
  if (K > 0) t["K"] = K;
  return t;
}

/// Builds the effective config JSON: the --config document (or {}) with flag
/// overrides patched on top, then parsed through the one config validator.
ebs::SweepConfig build_sweep_config(const SweepFlags& flags) {
  json cfg = json::object();
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw ebs::ConfigError("cannot open config " + flags.config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = json::parse(buf.str(), nullptr, false);
    if (cfg.is_discarded())
      throw ebs::ConfigError("malformed JSON in " + flags.config_path);
  }

  if (!flags.task.empty())
    cfg["task"] = task_patch(flags.task, flags.d, flags.K, flags.markov_stay);
  else if (cfg.contains("task")) {
    if (flags.d > 0) cfg["task"]["d"] = flags.d;
    if (flags.K > 0) cfg["task"]["K"] = flags.K;
  }

  if (!flags.sampler.empty()) {
    json cell{{"sampler", flags.sampler}};
    if (!flags.proxies.empty())
      cell["proxy"] = flags.proxies.size() == 1 ? json(flags.proxies[0])
                                                : json(flags.proxies);
    if (!flags.ks.empty())
      cell["k"] = flags.ks.size() == 1 ? json(flags.ks[0]) : json(flags.ks);
    if (!flags.gammas.empty()) {
      auto parse_one = [](const std::string& g) -> json {
        if (g == "inf") return json("inf");
        return json(std::stod(g));
      };
      if (flags.gammas.size() == 1) {
        cell["gamma"] = parse_one(flags.gammas[0]);
      } else {
        json arr = json::array();
        for (const std::string& g : flags.gammas) arr.push_back(parse_one(g));
        cell["gamma"] = std::move(arr);
      }
    }
    if (flags.temperature >= 0.0) cell["temperature"] = flags.temperature;
    cfg["grid"] = json::array({std::move(cell)});
  }

  if (!flags.predictor.empty()) {
    json p{{"kind", flags.predictor}};
    if (flags.epsilon >= 0.0) p["epsilon"] = flags.epsilon;
    if (!flags.predictor_cmd.empty()) p["command"] = flags.predictor_cmd;
    cfg["predictor"] = std::move(p);
  } else if (flags.epsilon >= 0.0) {
    cfg["predictor"] = json{{"kind", "perturbed"}, {"epsilon", flags.epsilon}};
  }

  if (!flags.seeds.empty()) cfg["seeds"] = flags.seeds;
  if (flags.n_puzzles > 0) cfg["n_puzzles"] = flags.n_puzzles;
  if (flags.n_given >= 0) cfg["n_given"] = flags.n_given;
  if (flags.block_len > 0) cfg["generation"]["block_len"] = flags.block_len;
  if (!flags.stop_marker.empty())
    cfg["generation"]["stop_marker"] = flags.stop_marker;
  if (!flags.out.empty()) cfg["out"] = flags.out;
  if (!flags.format.empty()) cfg["format"] = flags.format;

  return ebs::SweepConfig::from_json(cfg.dump());
}

int run_sweep_command(const SweepFlags& flags) {
  const ebs::SweepConfig config = build_sweep_config(flags);
  const std::vector<ebs::SweepRecord> records =
      ebs::run_sweep(config, flags.workers);

  if (config.out.empty())
    ebs::emit_report(std::cout, records, config.format);
  else
    ebs::emit_report_file(config.out, records, config.format);

  bool any_protocol = false;
  for (const ebs::SweepRecord& r : records) {
    if (r.failures > 0)
      std::cerr << "warning: " << r.failures << " failed items in cell "
                << r.sampler << "/" << r.proxy << "/" << r.param << ": "
                << r.error << "\n";
    if (r.protocol_failures) any_protocol = true;
  }
  return any_protocol ? kExitProtocolError : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked-sequence sampler sweeps and exact verification"};
  app.require_subcommand(1);

  SweepFlags sf;
  CLI::App* sweep = app.add_subcommand("sweep", "run a sampler grid over a task");
  sweep->add_option("--config", sf.config_path, "sweep config JSON file");
  sweep->add_option("--task", sf.task,
                    "copy_chain | parity_chain | markov_chain | shidoku");
  sweep->add_option("--d", sf.d, "sequence length (task dependent)");
  sweep->add_option("--K", sf.K, "vocabulary size (task dependent)");
  sweep->add_option("--markov-stay", sf.markov_stay,
                    "stay probability for the flag-built markov chain");
  sweep->add_option("--sampler", sf.sampler, "random | topk | eb");
  sweep->add_option("--proxy", sf.proxies, "confidence | entropy | margin")
      ->delimiter(',');
  sweep->add_option("--gamma", sf.gammas, "EB threshold(s); inf allowed")
      ->delimiter(',');
  sweep->add_option("--k", sf.ks, "Top-k count(s)")->delimiter(',');
  sweep->add_option("--temperature", sf.temperature, "sampling temperature");
  sweep->add_option("--predictor", sf.predictor, "exact | perturbed | external");
  sweep->add_option("--epsilon", sf.epsilon, "perturbed predictor mixing weight");
  sweep->add_option("--predictor-cmd", sf.predictor_cmd,
                    "external predictor argv (repeatable)");
  sweep->add_option("--seeds", sf.seeds, "seed list")->delimiter(',');
  sweep->add_option("--n-puzzles", sf.n_puzzles, "puzzles per seed");
  sweep->add_option("--n-given", sf.n_given, "revealed positions per puzzle");
  sweep->add_option("--block-len", sf.block_len, "semi-AR block length");
  sweep->add_option("--stop-marker", sf.stop_marker,
                    "stop marker token values")
      ->delimiter(',');
  sweep->add_option("--out", sf.out, "output path (default stdout)");
  sweep->add_option("--format", sf.format, "csv | json");
  sweep->add_option("--workers", sf.workers,
                    "worker threads (EBS_WORKERS caps this)");

  ebs::VerifyOptions vo;
  std::string verify_json_out;
  std::vector<std::string> verify_cmd;
  int verify_vocab = 3;
  CLI::App* verify = app.add_subcommand("verify", "run the exact-identity suite");
  verify->add_option("--trials", vo.decomposition_trials,
                     "decomposition/equality trials");
  verify->add_option("--entropy-trials", vo.entropy_bound_trials,
                     "entropy bound trials");
  verify->add_option("--exactness-joints", vo.exactness_joints,
                     "joints for the order-invariance check");
  verify->add_option("--orders-per-joint", vo.orders_per_joint,
                     "random orders per joint");
  verify->add_option("--tolerance", vo.tolerance, "identity tolerance");
  verify->add_option("--entropy-tolerance", vo.entropy_tolerance,
                     "entropy bound tolerance");
  verify->add_option("--seed", vo.seed, "trial RNG seed");
  verify->add_option("--predictor-cmd", verify_cmd,
                     "also run protocol conformance against this argv");
  verify->add_option("--conformance-cases", vo.conformance_cases,
                     "conformance request count");
  verify->add_option("--K", verify_vocab, "vocabulary size for conformance");
  verify->add_option("--json-out", verify_json_out, "write the report here");

  std::string gt_task, gt_out;
  int gt_d = -1, gt_K = -1;
  double gt_stay = -1.0;
  CLI::App* gen = app.add_subcommand("gen-task", "write a task's joint table");
  gen->add_option("--task", gt_task, "task name")->required();
  gen->add_option("--d", gt_d, "sequence length");
  gen->add_option("--K", gt_K, "vocabulary size");
  gen->add_option("--markov-stay", gt_stay, "markov stay probability");
  gen->add_option("--out", gt_out, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (sweep->parsed()) return run_sweep_command(sf);

    if (verify->parsed()) {
      if (!verify_cmd.empty()) {
        ebs::ExternalPredictorConfig ext;
        ext.command = verify_cmd;
        ext.vocab_size = verify_vocab;
        vo.external = std::move(ext);
      }
      const ebs::VerifyReport report = ebs::run_verification(vo);
      const std::string text = report.to_json();
      if (verify_json_out.empty()) {
        std::cout << text << "\n";
      } else {
        std::ofstream out(verify_json_out);
        if (!out)
          throw ebs::ConfigError("cannot open " + verify_json_out +
                                 " for writing");
        out << text << "\n";
      }
      return report.pass ? kExitOk : kExitVerificationFailure;
    }

    if (gen->parsed()) {
      const json t = task_patch(gt_task, gt_d, gt_K, gt_stay);
      ebs::TaskSpec task;
      if (gt_task == "copy_chain")
        task = ebs::TaskSpec::copy_chain(t.value("d", 4), t.value("K", 2));
      else if (gt_task == "parity_chain")
        task = ebs::TaskSpec::parity_chain(t.value("d", 4));
      else if (gt_task == "markov_chain")
        task = ebs::TaskSpec::markov_chain(
            t.at("d").get<int>(),
            t.at("transition").get<std::vector<std::vector<double>>>(),
            t.at("initial").get<std::vector<double>>());
      else if (gt_task == "shidoku")
        task = ebs::TaskSpec::shidoku();
      else
        throw ebs::ConfigError("unknown task: " + gt_task);
      task.build_joint().save(gt_out);
      return kExitOk;
    }
  } catch (const ebs::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfigError;
  } catch (const ebs::ProtocolViolation& ex) {
    std::cerr << "protocol error: " << ex.what() << "\n";
    return kExitProtocolError;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}
