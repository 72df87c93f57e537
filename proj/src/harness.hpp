#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent.hpp"
#include "baselines.hpp"
#include "benchmarks.hpp"
#include "rlenv.hpp"

namespace ampsize {

inline constexpr int kConfigSchemaVersion = 1;

enum class OptimizerKind { Ddpg, Random, Grid, Bo };

const char* to_string(OptimizerKind k);

struct ExperimentConfig {
  std::string benchmark;
  OptimizerKind optimizer = OptimizerKind::Ddpg;
  long budget = 0;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  int workers = 0;  // 0: AMPSIZE_WORKERS or 1

  // Overrides on top of the benchmark defaults.
  std::optional<double> fmin, fmax, noise_ref_hz;
  std::optional<int> points_per_decade;
  std::optional<double> alpha;

  EnvConfig env;
  AgentConfig agent;
  double noise_decay_fraction = 0.3;  // used when agent.noise.decay_steps is not given
  bool decay_steps_given = false;
  BoConfig bo;
  std::vector<int> grid_counts;  // empty: derived from the budget
};

// Strict parse: unknown keys, a wrong schema_version or bad values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
long default_budget(OptimizerKind k);

// Benchmark definition with the config's overrides applied.
struct ResolvedBenchmark {
  Netlist netlist;
  DesignSpec spec;
  SimConfig sim;
  std::optional<std::vector<double>> reference;
};
ResolvedBenchmark resolve_benchmark(const ExperimentConfig& config);

struct SeedOutcome {
  std::uint64_t seed = 0;
  long evaluations = 0;
  double best_d = 0.0;
  bool satisfied = false;
  long first_satisfied = -1;  // 1-based simulation count, -1 if never
  std::vector<double> best_normalized;
  std::vector<double> best_x;
  MetricSet best_metrics;
  std::vector<double> best_q;
  std::size_t clamp_count = 0;
};

// Runs one seed and writes seed_<k>/{trace.csv,curves.csv,best.json} under dir.
SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir);

// Runs every seed, writes summary.json and metadata.json, returns the summary document.
nlohmann::json run_experiment(const ExperimentConfig& config);

enum class TableFormat { Markdown, Csv };

// One row per summary (the median-seed best design), preceded by the
// benchmark's reference design when one is configured.
std::string make_table(const std::vector<nlohmann::json>& summaries, TableFormat format);

// Problems found in the benchmark registry; empty when everything checks out.
std::vector<std::string> selfcheck();

// Samples the box uniformly and proposes hard-constraint thresholds that
// jointly admit about `target_fraction` of the valid samples.
nlohmann::json calibrate(const std::string& benchmark, long samples, std::uint64_t seed,
                         double target_fraction = 0.01);

int worker_count(int configured);

// Shortest round-trip decimal text.
std::string format_number(double v);

}  // namespace ampsize
