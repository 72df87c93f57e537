#ifndef AMPSIZE_AMPSIZE_H
#define AMPSIZE_AMPSIZE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(AMPSIZE_BUILDING)
#define AMPSIZE_API __declspec(dllexport)
#else
#define AMPSIZE_API __declspec(dllimport)
#endif
#else
#define AMPSIZE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ampsize_status {
  AMPSIZE_OK = 0,
  AMPSIZE_E_INVALID_ARGUMENT = 1, /* null handle, bad length, out-of-range value */
  AMPSIZE_E_PARSE = 2,            /* netlist or JSON syntax */
  AMPSIZE_E_CONFIG = 3,           /* well-formed but unacceptable configuration */
  AMPSIZE_E_CIRCUIT = 4,          /* structural circuit problem, e.g. a floating node */
  AMPSIZE_E_CONVERGENCE = 5,      /* DC operating point not found */
  AMPSIZE_E_IO = 6,
  AMPSIZE_E_RUNTIME = 7
} ampsize_status;

typedef enum ampsize_table_format { AMPSIZE_TABLE_MARKDOWN = 0, AMPSIZE_TABLE_CSV = 1 } ampsize_table_format;

typedef struct ampsize_netlist ampsize_netlist;
typedef struct ampsize_config ampsize_config;

typedef struct ampsize_metrics {
  int valid;
  double gain;
  double gain_db_ohm;
  double bandwidth;
  int bandwidth_in_range;
  double peaking;
  double power;
  double gate_area;
  double input_noise_density;
} ampsize_metrics;

/* Message for the last failing call on this thread; empty if none. */
AMPSIZE_API const char* ampsize_last_error(void);
AMPSIZE_API const char* ampsize_version(void);
/* Releases strings returned through char** out-parameters. */
AMPSIZE_API void ampsize_string_free(char* s);

AMPSIZE_API ampsize_status ampsize_netlist_parse(const char* text, ampsize_netlist** out);
AMPSIZE_API void ampsize_netlist_free(ampsize_netlist* netlist);
AMPSIZE_API ampsize_status ampsize_netlist_param_count(const ampsize_netlist* netlist, size_t* out);
AMPSIZE_API ampsize_status ampsize_netlist_param_name(const ampsize_netlist* netlist, size_t index, char** out);
AMPSIZE_API ampsize_status ampsize_netlist_serialize(const ampsize_netlist* netlist, char** out);

/* Simulates with parameter values x (SI units). A failed simulation returns
   AMPSIZE_OK with metrics->valid == 0; the reason is in ampsize_last_error(). */
AMPSIZE_API ampsize_status ampsize_simulate(const ampsize_netlist* netlist, const double* x, size_t n,
                                            const char* ac_input, const char* ac_output, ampsize_metrics* metrics);

AMPSIZE_API ampsize_status ampsize_benchmark_count(size_t* out);
AMPSIZE_API ampsize_status ampsize_benchmark_name(size_t index, char** out);
AMPSIZE_API ampsize_status ampsize_benchmark_dimension(const char* name, size_t* out);
/* Scores a normalized design (entries in [-1, 1]) on a registered benchmark. */
AMPSIZE_API ampsize_status ampsize_benchmark_evaluate(const char* name, const double* normalized, size_t n,
                                                      ampsize_metrics* metrics, double* d, int* satisfied);

AMPSIZE_API ampsize_status ampsize_config_load(const char* path, ampsize_config** out);
AMPSIZE_API ampsize_status ampsize_config_parse(const char* json_text, ampsize_config** out);
AMPSIZE_API void ampsize_config_free(ampsize_config* config);
AMPSIZE_API ampsize_status ampsize_config_set_seeds(ampsize_config* config, const uint64_t* seeds, size_t n);
AMPSIZE_API ampsize_status ampsize_config_set_output_dir(ampsize_config* config, const char* dir);

/* Runs every seed; *summary_json receives the summary document. */
AMPSIZE_API ampsize_status ampsize_run(const ampsize_config* config, char** summary_json);

/* Each path is a run directory or a summary.json file. */
AMPSIZE_API ampsize_status ampsize_table(const char* const* paths, size_t n, ampsize_table_format format, char** out);

/* *ok is 1 when the registry passes; *report lists problems one per line. */
AMPSIZE_API ampsize_status ampsize_selfcheck(int* ok, char** report);

AMPSIZE_API ampsize_status ampsize_calibrate(const char* benchmark, long samples, uint64_t seed,
                                             double target_fraction, char** json_out);

#ifdef __cplusplus
}
#endif

#endif
