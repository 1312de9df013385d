#include "ebs/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "ebs/predictors.hpp"

namespace ebs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double parse_gamma(const nlohmann::json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return kInf;
    throw ConfigError("gamma: expected a number or \"inf\"");
  }
  return v.get<double>();
}

std::vector<SamplerPolicy> expand_grid_entry(const nlohmann::json& entry) {
  if (!entry.is_object() || !entry.contains("sampler"))
    throw ConfigError("grid entry must be an object with a \"sampler\" field");
  const SamplerKind kind = parse_sampler_kind(entry.at("sampler").get<std::string>());
  const double temperature =
      entry.contains("temperature") ? entry.at("temperature").get<double>() : 0.0;

  std::vector<ProxyKind> proxies;
  if (entry.contains("proxy")) {
    const auto& p = entry.at("proxy");
    if (p.is_array())
      for (const auto& name : p) proxies.push_back(parse_proxy_kind(name.get<std::string>()));
    else
      proxies.push_back(parse_proxy_kind(p.get<std::string>()));
  } else {
    proxies.push_back(ProxyKind::Entropy);
  }

  std::vector<SamplerPolicy> cells;
  switch (kind) {
    case SamplerKind::Random:
      cells.push_back(SamplerPolicy::random_unmasking(temperature));
      break;
    case SamplerKind::TopK: {
      std::vector<int> ks;
      if (!entry.contains("k")) throw ConfigError("topk grid entry needs \"k\"");
      const auto& kv = entry.at("k");
      if (kv.is_array())
        for (const auto& v : kv) ks.push_back(v.get<int>());
      else
        ks.push_back(kv.get<int>());
      for (ProxyKind proxy : proxies)
        for (int k : ks) cells.push_back(SamplerPolicy::topk(k, proxy, temperature));
      break;
    }
    case SamplerKind::EB: {
      std::vector<double> gammas;
      if (!entry.contains("gamma")) throw ConfigError("eb grid entry needs \"gamma\"");
      const auto& gv = entry.at("gamma");
      if (gv.is_array())
        for (const auto& v : gv) gammas.push_back(parse_gamma(v));
      else
        gammas.push_back(parse_gamma(gv));
      for (ProxyKind proxy : proxies)
        for (double g : gammas) cells.push_back(SamplerPolicy::eb(g, proxy, temperature));
      break;
    }
  }
  return cells;
}

TaskSpec task_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("name"))
    throw ConfigError("task must be an object with a \"name\" field");
  const std::string name = j.at("name").get<std::string>();
  TaskSpec task;
  if (name == "copy_chain") {
    task = TaskSpec::copy_chain(j.value("d", 4), j.value("K", 2));
  } else if (name == "parity_chain") {
    task = TaskSpec::parity_chain(j.value("d", 4));
  } else if (name == "markov_chain") {
    if (!j.contains("transition") || !j.contains("initial"))
      throw ConfigError("markov_chain task needs \"transition\" and \"initial\"");
    task = TaskSpec::markov_chain(
        j.value("d", 4), j.at("transition").get<std::vector<std::vector<double>>>(),
        j.at("initial").get<std::vector<double>>());
  } else if (name == "shidoku") {
    task = TaskSpec::shidoku();
  } else {
    throw ConfigError("unknown task: " + name);
  }
  if (j.contains("stop_marker"))
    task.stop_marker = j.at("stop_marker").get<std::vector<int>>();
  if (j.contains("require_unique"))
    task.require_unique = j.at("require_unique").get<bool>();
  return task;
}

struct ItemResult {
  bool ok = false;
  bool complete = false;
  bool valid = false;
  bool protocol_failure = false;
  int nfe = 0;
  int effective_nfe = 0;
  int answer_len = 0;
  int unmasked = 0;
  double seconds = 0.0;
  std::string error;
};

nlohmann::json record_to_json(const SweepRecord& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  nlohmann::json j;
  j["task"] = r.task;
  j["sampler"] = r.sampler;
  j["proxy"] = r.proxy;
  j["param"] = r.param;
  j["seed_count"] = r.seed_count;
  j["accuracy"] = num(r.accuracy);
  j["accuracy_stderr"] = num(r.accuracy_stderr);
  j["accuracy_vacuous"] = r.accuracy_vacuous;
  j["mean_nfe"] = num(r.mean_nfe);
  j["mean_effective_nfe"] = num(r.mean_effective_nfe);
  j["tokens_per_step"] = num(r.tokens_per_step);
  j["mean_answer_len"] = num(r.mean_answer_len);
  j["seconds"] = num(r.seconds);
  j["failures"] = r.failures;
  j["protocol_failures"] = r.protocol_failures;
  j["error"] = r.error;
  return j;
}

double json_to_double(const nlohmann::json& v) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ConfigError("unexpected numeric string: " + s);
  }
  return v.get<double>();
}

}  // namespace

std::string cell_param_label(const SamplerPolicy& policy) {
  switch (policy.kind) {
    case SamplerKind::Random:
      return "-";
    case SamplerKind::TopK:
      return std::to_string(policy.k);
    case SamplerKind::EB:
      return format_double(policy.gamma);
  }
  return "-";
}

void SweepConfig::validate() const {
  if (grid.empty()) throw ConfigError("sweep: grid must be non-empty");
  if (seeds.empty()) throw ConfigError("sweep: seeds must be non-empty");
  if (n_puzzles < 1) throw ConfigError("sweep: n_puzzles must be >= 1");
  if (n_given < 0 || n_given >= task.d)
    throw ConfigError("sweep: need 0 <= n_given < d");
  for (const SamplerPolicy& p : grid) p.validate();
  const GenerationConfig resolved = generation.resolved(task.d);
  if (resolved.max_steps < resolved.region->length())
    throw ConfigError("sweep: max_steps must cover the region length");
  if (format != "csv" && format != "json")
    throw ConfigError("sweep: format must be csv or json");
  if (predictor.kind == PredictorSpec::Kind::Perturbed &&
      !(predictor.epsilon >= 0.0 && predictor.epsilon <= 1.0))
    throw ConfigError("sweep: epsilon must lie in [0, 1]");
  if (predictor.kind == PredictorSpec::Kind::External && predictor.command.empty())
    throw ConfigError("sweep: external predictor needs a command");
}

SweepConfig SweepConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("sweep config: malformed JSON: ") + ex.what());
  }
  if (!j.is_object()) throw ConfigError("sweep config: expected an object");
  SweepConfig cfg;
  if (!j.contains("task")) throw ConfigError("sweep config: missing \"task\"");
  cfg.task = task_from_json(j.at("task"));

  if (j.contains("predictor")) {
    const auto& p = j.at("predictor");
    const std::string kind = p.value("kind", std::string("exact"));
    if (kind == "exact") {
      cfg.predictor.kind = PredictorSpec::Kind::Exact;
    } else if (kind == "perturbed") {
      cfg.predictor.kind = PredictorSpec::Kind::Perturbed;
      cfg.predictor.epsilon = p.value("epsilon", 0.0);
    } else if (kind == "external") {
      cfg.predictor.kind = PredictorSpec::Kind::External;
      cfg.predictor.command = p.value("command", std::vector<std::string>{});
      cfg.predictor.timeout_ms = p.value("timeout_ms", 10'000);
    } else {
      throw ConfigError("sweep config: unknown predictor kind: " + kind);
    }
  }

  if (!j.contains("grid")) throw ConfigError("sweep config: missing \"grid\"");
  for (const auto& entry : j.at("grid")) {
    const std::vector<SamplerPolicy> cells = expand_grid_entry(entry);
    cfg.grid.insert(cfg.grid.end(), cells.begin(), cells.end());
  }

  cfg.seeds = j.value("seeds", std::vector<std::uint64_t>{1});
  cfg.n_puzzles = j.value("n_puzzles", 1);
  cfg.n_given = j.value("n_given", 0);

  if (j.contains("generation")) {
    const auto& g = j.at("generation");
    if (g.contains("region")) {
      const auto r = g.at("region").get<std::vector<int>>();
      if (r.size() != 2) throw ConfigError("generation.region must be [begin, end)");
      cfg.generation.region = IndexRange{r[0], r[1]};
    }
    if (g.contains("block_len")) cfg.generation.block_len = g.at("block_len").get<int>();
    if (g.contains("stop_marker"))
      cfg.generation.stop_marker = g.at("stop_marker").get<std::vector<int>>();
    if (g.contains("max_steps")) cfg.generation.max_steps = g.at("max_steps").get<int>();
  }
  if (!cfg.generation.stop_marker && cfg.task.stop_marker)
    cfg.generation.stop_marker = cfg.task.stop_marker;

  cfg.out = j.value("out", std::string());
  cfg.format = j.value("format", std::string("csv"));
  cfg.validate();
  return cfg;
}

int resolve_worker_count(int requested) {
  int workers = requested;
  if (workers <= 0) {
    const unsigned hc = std::thread::hardware_concurrency();
    workers = hc > 0 ? static_cast<int>(hc) : 1;
  }
  if (const char* env = std::getenv("EBS_WORKERS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || cap < 1) throw ConfigError("EBS_WORKERS must be a positive integer");
    // The env var caps the count; an unspecified request adopts it directly.
    workers = requested > 0 ? std::min<long>(workers, cap) : static_cast<int>(cap);
  }
  return workers;
}

std::vector<SweepRecord> run_sweep(const SweepConfig& config, int workers) {
  config.validate();
  const int n_workers = resolve_worker_count(workers);
  const JointTable joint = config.task.build_joint();
  const GenerationConfig generation = config.generation.resolved(config.task.d);

  std::shared_ptr<const ConditionalPredictor> shared_predictor;
  if (config.predictor.kind == PredictorSpec::Kind::Exact)
    shared_predictor = std::make_shared<ExactOracle>(joint);
  else if (config.predictor.kind == PredictorSpec::Kind::Perturbed)
    shared_predictor = std::make_shared<PerturbedOracle>(joint, config.predictor.epsilon);

  const std::size_t n_cells = config.grid.size();
  const std::size_t per_cell = config.seeds.size() * static_cast<std::size_t>(config.n_puzzles);
  const std::size_t n_items = n_cells * per_cell;
  std::vector<ItemResult> results(n_items);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    // External predictors are per-worker: one subprocess per connection.
    std::shared_ptr<const ConditionalPredictor> predictor = shared_predictor;
    if (config.predictor.kind == PredictorSpec::Kind::External) {
      ExternalPredictorConfig ext;
      ext.command = config.predictor.command;
      ext.timeout_ms = config.predictor.timeout_ms;
      ext.vocab_size = config.task.K;
      try {
        predictor = std::make_shared<ExternalPredictor>(std::move(ext));
      } catch (const std::exception& ex) {
        // Every item this worker claims fails with the spawn error.
        std::size_t item;
        while ((item = next.fetch_add(1)) < n_items) {
          results[item].error = std::string("predictor spawn failed: ") + ex.what();
          results[item].protocol_failure = true;
        }
        return;
      }
    }
    std::size_t item;
    while ((item = next.fetch_add(1)) < n_items) {
      const std::size_t cell = item / per_cell;
      const std::size_t within = item % per_cell;
      const std::size_t seed_idx = within / static_cast<std::size_t>(config.n_puzzles);
      const std::size_t puzzle_idx = within % static_cast<std::size_t>(config.n_puzzles);
      const std::uint64_t seed = config.seeds[seed_idx];
      ItemResult& r = results[item];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        RngStream puzzle_rng = RngStream::derive(seed, {0x70757a7aULL, puzzle_idx});
        const MaskedSequence puzzle =
            make_puzzle(config.task, joint, config.n_given, puzzle_rng);
        RngStream gen_rng = RngStream::derive(seed, {0x67656e00ULL, cell, puzzle_idx});
        const GenerationResult gen =
            generate(*predictor, puzzle, config.grid[cell], generation, gen_rng);
        r.ok = true;
        r.nfe = gen.stats.nfe;
        r.effective_nfe = gen.stats.effective_nfe;
        r.answer_len = gen.stats.answer_len;
        for (int c : gen.stats.per_step_counts) r.unmasked += c;
        r.complete = gen.sequence.fully_unmasked();
        if (r.complete) r.valid = config.task.validate_state(gen.sequence.tokens());
      } catch (const ProtocolViolation& ex) {
        r.error = std::string("ProtocolViolation at cell ") + std::to_string(cell) +
                  " seed " + std::to_string(seed) + " puzzle " +
                  std::to_string(puzzle_idx) + ": " + ex.what();
        r.protocol_failure = true;
      } catch (const std::exception& ex) {
        r.error = std::string("cell ") + std::to_string(cell) + " seed " +
                  std::to_string(seed) + " puzzle " + std::to_string(puzzle_idx) +
                  ": " + ex.what();
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };

  std::vector<std::thread> pool;
  const int spawn = std::max(1, std::min<int>(n_workers, static_cast<int>(n_items)));
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int i = 0; i < spawn; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  // Deterministic aggregation in grid order.
  std::vector<SweepRecord> records;
  records.reserve(n_cells);
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    const SamplerPolicy& policy = config.grid[cell];
    SweepRecord rec;
    rec.task = config.task.name;
    rec.sampler = sampler_kind_name(policy.kind);
    rec.proxy = policy.kind == SamplerKind::Random ? "-" : proxy_kind_name(policy.proxy);
    rec.param = cell_param_label(policy);
    rec.seed_count = static_cast<int>(config.seeds.size());

    long ok_items = 0, complete_items = 0, valid_items = 0;
    long total_nfe = 0, total_effective = 0, total_answer = 0, total_unmasked = 0;
    for (std::size_t i = cell * per_cell; i < (cell + 1) * per_cell; ++i) {
      const ItemResult& r = results[i];
      rec.seconds += r.seconds;
      if (!r.ok) {
        ++rec.failures;
        if (r.protocol_failure) rec.protocol_failures = true;
        if (rec.error.empty()) rec.error = r.error;
        continue;
      }
      ++ok_items;
      total_nfe += r.nfe;
      total_effective += r.effective_nfe;
      total_answer += r.answer_len;
      total_unmasked += r.unmasked;
      if (r.complete) {
        ++complete_items;
        if (r.valid) ++valid_items;
      }
    }
    if (complete_items > 0) {
      rec.accuracy = static_cast<double>(valid_items) / static_cast<double>(complete_items);
      rec.accuracy_stderr =
          std::sqrt(rec.accuracy * (1.0 - rec.accuracy) / static_cast<double>(complete_items));
    } else {
      rec.accuracy = 1.0;  // vacuous, same convention as tasks::accuracy
      rec.accuracy_vacuous = true;
    }
    if (ok_items > 0) {
      rec.mean_nfe = static_cast<double>(total_nfe) / static_cast<double>(ok_items);
      rec.mean_effective_nfe =
          static_cast<double>(total_effective) / static_cast<double>(ok_items);
      rec.mean_answer_len =
          static_cast<double>(total_answer) / static_cast<double>(ok_items);
      rec.tokens_per_step =
          static_cast<double>(total_unmasked) / static_cast<double>(total_nfe);
    } else {
      rec.mean_nfe = rec.mean_effective_nfe = rec.mean_answer_len =
          rec.tokens_per_step = std::numeric_limits<double>::quiet_NaN();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void emit_report(std::ostream& out, const std::vector<SweepRecord>& records,
                 const std::string& format) {
  if (records.empty()) throw ConfigError("emit_report: no records");
  if (format == "csv") {
    out << "task,sampler,proxy,param,accuracy,accuracy_stderr,mean_nfe,"
           "mean_effective_nfe,tokens_per_step,mean_answer_len,seconds\n";
    for (const SweepRecord& r : records) {
      out << r.task << ',' << r.sampler << ',' << r.proxy << ',' << r.param << ','
          << format_double(r.accuracy) << ',' << format_double(r.accuracy_stderr)
          << ',' << format_double(r.mean_nfe) << ','
          << format_double(r.mean_effective_nfe) << ','
          << format_double(r.tokens_per_step) << ','
          << format_double(r.mean_answer_len) << ',';
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
      out << buf << '\n';
    }
  } else if (format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const SweepRecord& r : records) arr.push_back(record_to_json(r));
    out << arr.dump(2) << '\n';
  } else {
    throw ConfigError("emit_report: unknown format " + format);
  }
}

void emit_report_file(const std::string& path,
                      const std::vector<SweepRecord>& records,
                      const std::string& format) {
  std::ofstream out(path);
  if (!out) throw Error("emit_report: cannot open " + path + " for writing");
  emit_report(out, records, format);
}

std::vector<SweepRecord> records_from_json(const std::string& text) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("records: malformed JSON: ") + ex.what());
  }
  if (!arr.is_array()) throw ConfigError("records: expected a JSON array");
  std::vector<SweepRecord> records;
  for (const auto& j : arr) {
    SweepRecord r;
    r.task = j.at("task").get<std::string>();
    r.sampler = j.at("sampler").get<std::string>();
    r.proxy = j.at("proxy").get<std::string>();
    r.param = j.at("param").get<std::string>();
    r.seed_count = j.at("seed_count").get<int>();
    r.accuracy = json_to_double(j.at("accuracy"));
    r.accuracy_stderr = json_to_double(j.at("accuracy_stderr"));
    r.accuracy_vacuous = j.at("accuracy_vacuous").get<bool>();
    r.mean_nfe = json_to_double(j.at("mean_nfe"));
    r.mean_effective_nfe = json_to_double(j.at("mean_effective_nfe"));
    r.tokens_per_step = json_to_double(j.at("tokens_per_step"));
    r.mean_answer_len = json_to_double(j.at("mean_answer_len"));
    r.seconds = json_to_double(j.at("seconds"));
    r.failures = j.at("failures").get<int>();
    r.protocol_failures = j.at("protocol_failures").get<bool>();
    r.error = j.at("error").get<std::string>();
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace ebs
