#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ebs/samplers.hpp"
#include "ebs/tasks.hpp"
#include "ebs/wire.hpp"

namespace ebs {

struct PredictorSpec {
  enum class Kind { Exact, Perturbed, External };
  Kind kind = Kind::Exact;
  double epsilon = 0.0;              // Perturbed
  std::vector<std::string> command;  // External
  int timeout_ms = 10'000;           // External
};

struct SweepConfig {
  TaskSpec task;
  PredictorSpec predictor;
  std::vector<SamplerPolicy> grid;
  std::vector<std::uint64_t> seeds;
  int n_puzzles = 1;
  int n_given = 0;
  GenerationConfig generation;
  std::string out;             // output path; empty means stdout
  std::string format = "csv";  // csv | json

  void validate() const;
  static SweepConfig from_json(const std::string& text);
};

/// One aggregated row per grid cell. Failed work items are counted and the
/// first failure message kept; they are excluded from the aggregates but the
/// cell itself is never dropped.
struct SweepRecord {
  std::string task;
  std::string sampler;  // random | topk | eb
  std::string proxy;    // confidence | entropy | margin | "-"
  std::string param;    // k, gamma (inf for unbounded), or "-"
  int seed_count = 0;
  double accuracy = 0.0;
  double accuracy_stderr = 0.0;
  bool accuracy_vacuous = false;  // no completed samples contributed
  double mean_nfe = 0.0;
  double mean_effective_nfe = 0.0;
  double tokens_per_step = 0.0;  // total unmasked / total nfe
  double mean_answer_len = 0.0;
  double seconds = 0.0;  // informational; excluded from reproducibility
  int failures = 0;
  bool protocol_failures = false;  // any failure was a predictor/protocol one
  std::string error;
};

std::string cell_param_label(const SamplerPolicy& policy);

/// Runs every grid cell x seed x puzzle work item. Puzzles are derived from
/// (seed, puzzle index) only, so all cells see the same puzzle set;
/// generation randomness is derived from (seed, cell index, puzzle index).
/// `workers` <= 0 picks a default; the EBS_WORKERS environment variable caps
/// the count either way. Results are aggregated in grid order regardless of
/// scheduling.
std::vector<SweepRecord> run_sweep(const SweepConfig& config, int workers = 0);

int resolve_worker_count(int requested);

void emit_report(std::ostream& out, const std::vector<SweepRecord>& records,
                 const std::string& format);
void emit_report_file(const std::string& path,
                      const std::vector<SweepRecord>& records,
                      const std::string& format);

/// Parses the JSON report format back into records (CSV is write-only).
std::vector<SweepRecord> records_from_json(const std::string& text);

}  // namespace ebs
