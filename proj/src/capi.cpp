#include "ampsize/ampsize.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "errors.hpp"
#include "harness.hpp"

struct ampsize_netlist {
  ampsize::Netlist netlist;
};

struct ampsize_config {
  ampsize::ExperimentConfig config;
};

namespace {

thread_local std::string last_error;

ampsize_status fail(ampsize_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs body, mapping exceptions to status codes.
template <class F>
ampsize_status guarded(F&& body) {
  last_error.clear();
  try {
    return body();
  } catch (const ampsize::ParseError& e) {
    return fail(AMPSIZE_E_PARSE, e.what());
  } catch (const nlohmann::json::parse_error& e) {
    return fail(AMPSIZE_E_PARSE, e.what());
  } catch (const ampsize::ConfigError& e) {
    return fail(AMPSIZE_E_CONFIG, e.what());
  } catch (const ampsize::ConvergenceError& e) {
    return fail(AMPSIZE_E_CONVERGENCE, e.what());
  } catch (const ampsize::CircuitError& e) {
    return fail(AMPSIZE_E_CIRCUIT, e.what());
  } catch (const ampsize::ShapeError& e) {
    return fail(AMPSIZE_E_INVALID_ARGUMENT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(AMPSIZE_E_IO, e.what());
  } catch (const std::exception& e) {
    return fail(AMPSIZE_E_RUNTIME, e.what());
  } catch (...) {
    return fail(AMPSIZE_E_RUNTIME, "unknown error");
  }
}

void copy_metrics(const ampsize::MetricSet& m, bool ok, ampsize_metrics* out) {
  *out = ampsize_metrics{};
  out->valid = ok && m.valid ? 1 : 0;
  if (!out->valid) return;
  out->gain = m.gain;
  out->gain_db_ohm = m.gain_db_ohm;
  out->bandwidth = m.bandwidth;
  out->bandwidth_in_range = m.bandwidth_in_range ? 1 : 0;
  out->peaking = m.peaking;
  out->power = m.power;
  out->gate_area = m.gate_area;
  out->input_noise_density = m.input_noise_density;
}

}  // namespace

extern "C" {

const char* ampsize_last_error(void) { return last_error.c_str(); }

const char* ampsize_version(void) { return "0.1.0"; }

void ampsize_string_free(char* s) { std::free(s); }

ampsize_status ampsize_netlist_parse(const char* text, ampsize_netlist** out) {
  if (!text || !out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new ampsize_netlist{ampsize::parse_netlist(text)};
    return AMPSIZE_OK;
  });
}

void ampsize_netlist_free(ampsize_netlist* netlist) { delete netlist; }

ampsize_status ampsize_netlist_param_count(const ampsize_netlist* netlist, size_t* out) {
  if (!netlist || !out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  *out = netlist->netlist.params.size();
  return AMPSIZE_OK;
}

ampsize_status ampsize_netlist_param_name(const ampsize_netlist* netlist, size_t index, char** out) {
  if (!netlist || !out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  if (index >= netlist->netlist.params.size()) return fail(AMPSIZE_E_INVALID_ARGUMENT, "parameter index out of range");
  *out = dup_string(netlist->netlist.params[index].name);
  return AMPSIZE_OK;
}

ampsize_status ampsize_netlist_serialize(const ampsize_netlist* netlist, char** out) {
  if (!netlist || !out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = dup_string(ampsize::serialize_netlist(netlist->netlist));
    return AMPSIZE_OK;
  });
}

ampsize_status ampsize_simulate(const ampsize_netlist* netlist, const double* x, size_t n, const char* ac_input,
                                const char* ac_output, ampsize_metrics* metrics) {
  if (!netlist || (!x && n) || !ac_input || !ac_output || !metrics) {
    return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  }
  if (n != netlist->netlist.params.size()) {
    return fail(AMPSIZE_E_INVALID_ARGUMENT, "expected " + std::to_string(netlist->netlist.params.size()) +
                                                " parameter values, got " + std::to_string(n));
  }
  return guarded([&] {
    ampsize::SimConfig cfg;
    cfg.ac_input = ac_input;
    cfg.ac_output = ac_output;
    ampsize::ParamVector pv{std::vector<double>(x, x + n)};
    ampsize::resolve(netlist->netlist, pv);  // surfaces box and dimension errors as status codes
    const ampsize::SimResult r = ampsize::simulate(netlist->netlist, pv, cfg);
    copy_metrics(r.metrics, r.ok, metrics);
    if (!r.ok) last_error = r.failure;
    return AMPSIZE_OK;
  });
}

ampsize_status ampsize_benchmark_count(size_t* out) {
  if (!out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  *out = ampsize::benchmark_registry().size();
  return AMPSIZE_OK;
}

ampsize_status ampsize_benchmark_name(size_t index, char** out) {
  if (!out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  const auto& reg = ampsize::benchmark_registry();
  if (index >= reg.size()) return fail(AMPSIZE_E_INVALID_ARGUMENT, "benchmark index out of range");
  *out = dup_string(reg[index].name);
  return AMPSIZE_OK;
}

ampsize_status ampsize_benchmark_dimension(const char* name, size_t* out) {
  if (!name || !out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = ampsize::parse_netlist(ampsize::find_benchmark(name).netlist_text).params.size();
    return AMPSIZE_OK;
  });
}

ampsize_status ampsize_benchmark_evaluate(const char* name, const double* normalized, size_t n,
                                          ampsize_metrics* metrics, double* d, int* satisfied) {
  if (!name || (!normalized && n) || !metrics || !d || !satisfied) {
    return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const auto& def = ampsize::find_benchmark(name);
    ampsize::CircuitObjective objective(ampsize::parse_netlist(def.netlist_text), def.spec, def.sim);
    if (n != objective.dimension()) {
      return fail(AMPSIZE_E_INVALID_ARGUMENT, "expected " + std::to_string(objective.dimension()) +
                                                  " normalized values, got " + std::to_string(n));
    }
    const ampsize::Evaluation ev = objective.evaluate(std::span<const double>(normalized, n));
    copy_metrics(ev.sim.metrics, ev.sim.ok, metrics);
    *d = ev.score.d;
    *satisfied = ev.score.satisfied ? 1 : 0;
    if (!ev.sim.ok) last_error = ev.sim.failure;
    return AMPSIZE_OK;
  });
}

ampsize_status ampsize_config_load(const char* path, ampsize_config** out) {
  if (!path || !out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new ampsize_config{ampsize::load_config(path)};
    return AMPSIZE_OK;
  });
}

ampsize_status ampsize_config_parse(const char* json_text, ampsize_config** out) {
  if (!json_text || !out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new ampsize_config{ampsize::parse_config(nlohmann::json::parse(json_text))};
    return AMPSIZE_OK;
  });
}

void ampsize_config_free(ampsize_config* config) { delete config; }

ampsize_status ampsize_config_set_seeds(ampsize_config* config, const uint64_t* seeds, size_t n) {
  if (!config || !seeds || n == 0) return fail(AMPSIZE_E_INVALID_ARGUMENT, "need a config and at least one seed");
  config->config.seeds.assign(seeds, seeds + n);
  return AMPSIZE_OK;
}

ampsize_status ampsize_config_set_output_dir(ampsize_config* config, const char* dir) {
  if (!config || !dir || !*dir) return fail(AMPSIZE_E_INVALID_ARGUMENT, "need a config and a directory");
  config->config.output_dir = dir;
  return AMPSIZE_OK;
}

ampsize_status ampsize_run(const ampsize_config* config, char** summary_json) {
  if (!config) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    const nlohmann::json summary = ampsize::run_experiment(config->config);
    if (summary_json) *summary_json = dup_string(summary.dump(2));
    return AMPSIZE_OK;
  });
}

ampsize_status ampsize_table(const char* const* paths, size_t n, ampsize_table_format format, char** out) {
  if (!paths || n == 0 || !out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "need at least one summary path");
  return guarded([&] {
    std::vector<nlohmann::json> summaries;
    for (size_t i = 0; i < n; ++i) {
      if (!paths[i]) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null summary path");
      std::filesystem::path p = paths[i];
      if (std::filesystem::is_directory(p)) p /= "summary.json";
      std::ifstream in(p);
      if (!in) return fail(AMPSIZE_E_IO, "cannot open '" + p.string() + "'");
      summaries.push_back(nlohmann::json::parse(in));
    }
    *out = dup_string(ampsize::make_table(
        summaries, format == AMPSIZE_TABLE_CSV ? ampsize::TableFormat::Csv : ampsize::TableFormat::Markdown));
    return AMPSIZE_OK;
  });
}

ampsize_status ampsize_selfcheck(int* ok, char** report) {
  if (!ok || !report) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    std::string text;
    const auto problems = ampsize::selfcheck();
    for (const auto& p : problems) text += p + "\n";
    *ok = problems.empty() ? 1 : 0;
    *report = dup_string(text);
    return AMPSIZE_OK;
  });
}

ampsize_status ampsize_calibrate(const char* benchmark, long samples, uint64_t seed, double target_fraction,
                                 char** json_out) {
  if (!benchmark || !json_out) return fail(AMPSIZE_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *json_out = dup_string(ampsize::calibrate(benchmark, samples, seed, target_fraction).dump(2));
    return AMPSIZE_OK;
  });
}

}  // extern "C"
