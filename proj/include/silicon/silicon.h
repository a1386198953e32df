#ifndef SILICON_SILICON_H
#define SILICON_SILICON_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SILICON_BUILDING_LIBRARY)
#    define SILICON_API __declspec(dllexport)
#  else
#    define SILICON_API __declspec(dllimport)
#  endif
#else
#  define SILICON_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum silicon_status {
    SILICON_OK = 0,
    SILICON_ERR_CONFIG = 1,
    SILICON_ERR_IO = 2,
    SILICON_ERR_VALIDATION = 3,
    SILICON_ERR_TRANSPORT = 4,
    SILICON_ERR_REFUSAL = 5,
    SILICON_ERR_CAPABILITY = 6,
    SILICON_ERR_NO_SIGNAL = 7,
    SILICON_ERR_DEGENERATE = 8,
    SILICON_ERR_CACHE_CORRUPT = 9,
    SILICON_ERR_REPLAY_MISS = 10,
    SILICON_ERR_INFEASIBLE = 11,
    SILICON_ERR_INVALID_ARGUMENT = 100,
    SILICON_ERR_INTERNAL = 101
} silicon_status;

typedef struct silicon_config silicon_config;
typedef struct silicon_dataset silicon_dataset;

SILICON_API const char* silicon_version(void);
SILICON_API const char* silicon_status_name(silicon_status status);

/* Message of the last failed call on this thread; empty after a success. */
SILICON_API const char* silicon_last_error(void);

/* Frees every char* returned through an out parameter. */
SILICON_API void silicon_string_free(char* s);

/* overrides_json may be NULL or an object with any of:
   backend, cache, out (paths), seed, parallelism (integers), temps (array of numbers). */
SILICON_API silicon_status silicon_config_load(const char* path, const char* overrides_json, silicon_config** out);
SILICON_API void silicon_config_free(silicon_config* config);
SILICON_API silicon_status silicon_config_json(const silicon_config* config, char** out_json);

/* Dry run: conditioning text for one respondent, no backend involved. target may be NULL. */
SILICON_API silicon_status silicon_render(const silicon_config* config, const char* respondent_id,
                                          const char* target, char** out_text);

/* study: NULL for the config's own study, or "vote", "wordlist", "interview",
   "ablation", "temperature_sweep". Writes outputs and the manifest; returns a JSON summary. */
SILICON_API silicon_status silicon_run(const silicon_config* config, const char* study, char** out_summary);

SILICON_API silicon_status silicon_cost(const silicon_config* config, char** out_json);

/* Recomputes association statistics from the human data and any silicon.csv
   already written under the config's output directory. Never queries a backend. */
SILICON_API silicon_status silicon_stats(const silicon_config* config, char** out_json);

/* Loads and validates the config's dataset. */
SILICON_API silicon_status silicon_dataset_open(const silicon_config* config, int lenient, silicon_dataset** out);
SILICON_API silicon_status silicon_dataset_load(const char* table, const char* codebook, int lenient,
                                                silicon_dataset** out);
SILICON_API void silicon_dataset_free(silicon_dataset* dataset);
SILICON_API size_t silicon_dataset_size(const silicon_dataset* dataset);
/* Variables, missingness, descriptives and any lenient-mode cell errors. */
SILICON_API silicon_status silicon_dataset_summary(const silicon_dataset* dataset, char** out_json);
SILICON_API silicon_status silicon_dataset_save(const silicon_dataset* dataset, const char* path);

/* Evaluation plan from a JSON file: {lists | lists_file, raters, per_rater, per_list, seed, output_dir}.
   overrides_json accepts seed and out. */
SILICON_API silicon_status silicon_plan_eval(const char* path, const char* overrides_json, char** out_json);

/* Agreement metrics for an r x c table of counts in row-major order. */
SILICON_API silicon_status silicon_table_metrics(size_t rows, size_t cols, const int64_t* cells, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
