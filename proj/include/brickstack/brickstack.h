/* C interface to the brick-stacking planner and experiment harness. */
#ifndef BRICKSTACK_H
#define BRICKSTACK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(BRICKSTACK_BUILDING_LIBRARY)
#define BKS_API __declspec(dllexport)
#else
#define BKS_API __declspec(dllimport)
#endif
#else
#define BKS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bks_status {
  BKS_OK = 0,
  BKS_ERR_INVALID_ARGUMENT = 1,
  BKS_ERR_IO = 2,
  BKS_ERR_PARSE = 3,
  BKS_ERR_INFEASIBLE = 4,
  BKS_ERR_INTERNAL = 5
} bks_status;

typedef struct bks_experiment bks_experiment;

BKS_API const char* bks_version(void);
BKS_API const char* bks_status_string(bks_status status);

/* Message for the last failed call on this thread; empty after a success. */
BKS_API const char* bks_last_error(void);

/* Frees strings returned through char** out-parameters. */
BKS_API void bks_string_free(char* s);

/* config_path may be NULL for built-in defaults. */
BKS_API bks_status bks_experiment_create(const char* config_path, bks_experiment** out);
BKS_API void bks_experiment_destroy(bks_experiment* e);

BKS_API bks_status bks_experiment_set_pattern(bks_experiment* e, const char* pattern); /* pyramid | grid */
BKS_API bks_status bks_experiment_set_policy(bks_experiment* e, const char* policy);   /* rules | llm | single-agent | classical */
BKS_API bks_status bks_experiment_set_trials(bks_experiment* e, int trials);
BKS_API bks_status bks_experiment_set_bricks(bks_experiment* e, int bricks);
BKS_API bks_status bks_experiment_set_seed(bks_experiment* e, uint64_t seed);
BKS_API bks_status bks_experiment_set_noise(bks_experiment* e, double sigma_m);
BKS_API bks_status bks_experiment_set_workers(bks_experiment* e, int workers);
BKS_API bks_status bks_experiment_set_out_dir(bks_experiment* e, const char* dir); /* NULL or "" keeps logs in memory */
BKS_API bks_status bks_experiment_set_placement_bias(bks_experiment* e, double dx_m, double dy_m);
BKS_API bks_status bks_experiment_set_weak_grasp(bks_experiment* e, int skip, int count, double total_force_n);

/* Runs every trial.  report_json receives the metrics report. */
BKS_API bks_status bks_experiment_run(bks_experiment* e, char** report_json);

/* Number of trial logs held after the last run, and one of them as JSONL. */
BKS_API size_t bks_experiment_log_count(const bks_experiment* e);
BKS_API bks_status bks_experiment_log_jsonl(const bks_experiment* e, size_t index, char** jsonl);

/* Reads *.jsonl logs from a directory.  reports_json is a JSON array with one
   report per policy and pattern; csv holds one table covering all of them.
   Either output may be NULL. */
BKS_API bks_status bks_eval_logs(const char* dir, char** reports_json, char** csv);

/* CSV rendering of a report object or an array of reports. */
BKS_API bks_status bks_report_csv(const char* reports_json, char** csv);

/* Each entry of reports_json holds one report object or an array of them.
   labels may be NULL to use the policy names. */
BKS_API bks_status bks_compare(const char* const* reports_json, const char* const* labels, size_t count,
                               int csv, char** table);

/* Re-executes a trial log from the first stage at or after from_tick and
   compares the result with the original text.  result_json describes the
   outcome; *identical is set to 1 when every line matches. */
BKS_API bks_status bks_replay(const char* log_jsonl, int64_t from_tick, int* identical, char** result_json);

/* Gate-ordering audit of a trial log.  violations_json is a JSON array of messages. */
BKS_API bks_status bks_audit(const char* log_jsonl, char** violations_json);

#ifdef __cplusplus
}
#endif

#endif /* BRICKSTACK_H */
