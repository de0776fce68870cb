#ifndef VODSWARM_H
#define VODSWARM_H

/* C interface to the vodswarm library.
 *
 * Functions return a vs_status. On failure vs_last_error() describes the
 * problem; the message is per-thread and valid until the next call on that
 * thread. Strings handed out through char** are owned by the caller and must
 * be released with vs_string_free(). Handles are released with their _free
 * function; passing NULL to any _free function is a no-op. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(VODSWARM_BUILDING_LIBRARY)
#    define VS_API __declspec(dllexport)
#  else
#    define VS_API __declspec(dllimport)
#  endif
#else
#  define VS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vs_status {
  VS_OK = 0,
  VS_ERR_USAGE = 1,    /* bad arguments or configuration */
  VS_ERR_INPUT = 2,    /* malformed or unusable input data */
  VS_ERR_INTERNAL = 3  /* protocol invariant violated */
} vs_status;

VS_API const char* vs_last_error(void);
VS_API void vs_string_free(char* s);
VS_API const char* vs_version(void);
/* Comma-separated policy names. Static storage. */
VS_API const char* vs_policy_names(void);

/* ---- workloads ---- */

typedef struct vs_workload vs_workload;

typedef enum vs_profile { VS_PROFILE_HI = 0, VS_PROFILE_MI = 1, VS_PROFILE_LI = 2 } vs_profile;

typedef struct vs_generator_config {
  vs_profile profile;
  size_t sessions;
  double object_length;    /* seconds */
  double playback_rate;    /* bytes per second */
  double mean_session_gap; /* seconds */
  double mean_think_time;  /* seconds */
  double start_skew;       /* (0, 1] */
  uint64_t seed;
} vs_generator_config;

VS_API void vs_generator_config_default(vs_generator_config* cfg);
VS_API vs_status vs_profile_parse(const char* name, vs_profile* out);

VS_API vs_status vs_workload_generate(const vs_generator_config* cfg, vs_workload** out);
/* Values <= 0 leave the trace's own metadata in charge. */
VS_API vs_status vs_workload_parse(const char* text, double object_length, double window, vs_workload** out);
VS_API vs_status vs_workload_serialize(const vs_workload* w, char** out);
VS_API size_t vs_workload_session_count(const vs_workload* w);
/* Dispersion, profile counts and the top_k most requested positions.
 * csv != 0 selects CSV instead of JSON. */
VS_API vs_status vs_workload_analyze(const vs_workload* w, double granularity, size_t top_k, int csv, char** out);
VS_API void vs_workload_free(vs_workload* w);

/* ---- simulation ---- */

typedef struct vs_sim_config vs_sim_config;
typedef struct vs_sim_result vs_sim_result;

VS_API vs_status vs_sim_config_new(vs_sim_config** out);
/* Applies INI text on top of the current values. */
VS_API vs_status vs_sim_config_apply_ini(vs_sim_config* cfg, const char* ini, const char* base_dir);
/* key is "section.name"; see vs_sim_config_options(). */
VS_API vs_status vs_sim_config_set(vs_sim_config* cfg, const char* key, const char* value);
VS_API vs_status vs_sim_config_validate(const vs_sim_config* cfg);
VS_API vs_status vs_sim_config_to_ini(const vs_sim_config* cfg, char** out);
/* One line per key: "section.name<TAB>flag<TAB>help". */
VS_API vs_status vs_sim_config_options(char** out);
VS_API void vs_sim_config_free(vs_sim_config* cfg);

VS_API vs_status vs_sim_run(const vs_sim_config* cfg, vs_sim_result** out);
VS_API vs_status vs_sim_result_report(const vs_sim_result* r, int csv, char** out);
VS_API vs_status vs_sim_result_event_log(const vs_sim_result* r, char** out);
VS_API void vs_sim_result_free(vs_sim_result* r);

/* ---- experiments ---- */

/* Runs an experiment spec (INI) on `workers` threads (0: all processors).
 * A non-NULL base_seed replaces the experiment's base seed. Any output pointer may
 * be NULL; output_dir receives the experiment's output directory or "". */
VS_API vs_status vs_compare(const char* spec, const char* base_dir, const uint64_t* base_seed, size_t workers,
                            char** json, char** csv, char** output_dir);

#ifdef __cplusplus
}
#endif

#endif /* VODSWARM_H */
