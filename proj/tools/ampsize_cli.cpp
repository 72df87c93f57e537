#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ampsize/ampsize.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(ampsize_status s) {
  switch (s) {
    case AMPSIZE_OK: return 0;
    case AMPSIZE_E_INVALID_ARGUMENT:
    case AMPSIZE_E_PARSE:
    case AMPSIZE_E_CONFIG: return kExitConfig;
    default: return kExitRuntime;
  }
}

int report(ampsize_status s) {
  if (s != AMPSIZE_OK) std::cerr << "error: " << ampsize_last_error() << '\n';
  return exit_code_for(s);
}

// Writes text to path, or stdout when path is empty.
int emit(const char* text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return 0;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transistor sizing experiments: simulator, RL agent and baseline optimizers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ampsize_version()));

  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::string out_dir;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed-override", seed_override, "Run this single seed instead of the configured list");
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* table = app.add_subcommand("table", "Tabulate run summaries for one benchmark");
  std::vector<std::string> inputs;
  std::string format = "md";
  std::string table_out;
  table->add_option("--in", inputs, "Run directories or summary.json files")->required();
  table->add_option("--format", format, "md or csv")->check(CLI::IsMember({"md", "csv"}));
  table->add_option("--output", table_out, "Write the table here instead of stdout");

  app.add_subcommand("selfcheck", "Validate the benchmark registry");

  auto* calib = app.add_subcommand("calibrate", "Propose spec thresholds from random samples");
  std::string benchmark;
  long samples = 20000;
  std::uint64_t calib_seed = 0;
  double fraction = 0.01;
  std::string calib_out;
  calib->add_option("--benchmark", benchmark, "Benchmark name")->required();
  calib->add_option("--samples", samples, "Number of random designs")->check(CLI::PositiveNumber);
  calib->add_option("--seed", calib_seed, "Sampling seed");
  calib->add_option("--fraction", fraction, "Target jointly satisfying fraction")->check(CLI::Range(1e-6, 0.999));
  calib->add_option("--output", calib_out, "Write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) {
    ampsize_config* cfg = nullptr;
    if (auto s = ampsize_config_load(config_path.c_str(), &cfg); s != AMPSIZE_OK) return report(s);
    ampsize_status s = AMPSIZE_OK;
    if (seed_override) s = ampsize_config_set_seeds(cfg, &*seed_override, 1);
    if (s == AMPSIZE_OK && !out_dir.empty()) s = ampsize_config_set_output_dir(cfg, out_dir.c_str());
    char* summary = nullptr;
    if (s == AMPSIZE_OK) s = ampsize_run(cfg, &summary);
    ampsize_config_free(cfg);
    if (s != AMPSIZE_OK) return report(s);
    std::cout << summary << '\n';
    ampsize_string_free(summary);
    return 0;
  }

  if (*table) {
    std::vector<const char*> paths;
    for (const auto& p : inputs) paths.push_back(p.c_str());
    char* text = nullptr;
    const auto s = ampsize_table(paths.data(), paths.size(),
                                 format == "csv" ? AMPSIZE_TABLE_CSV : AMPSIZE_TABLE_MARKDOWN, &text);
    if (s != AMPSIZE_OK) return report(s);
    const int code = emit(text, table_out);
    ampsize_string_free(text);
    return code;
  }

  if (app.got_subcommand("selfcheck")) {
    int ok = 0;
    char* text = nullptr;
    if (auto s = ampsize_selfcheck(&ok, &text); s != AMPSIZE_OK) return report(s);
    if (ok) {
      std::cout << "registry ok\n";
    } else {
      std::cerr << text;
    }
    ampsize_string_free(text);
    return ok ? 0 : kExitRuntime;
  }

  char* text = nullptr;
  if (auto s = ampsize_calibrate(benchmark.c_str(), samples, calib_seed, fraction, &text); s != AMPSIZE_OK) {
    return report(s);
  }
  const int code = emit((std::string(text) + "\n").c_str(), calib_out);
  ampsize_string_free(text);
  return code;
}
