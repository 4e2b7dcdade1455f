/* C interface to the cocoba active-learning core.
 *
 * Every function returning cocoba_status reports failure through a non-zero
 * code; cocoba_last_error() then holds a message for the calling thread.
 * Handles are opaque and owned by the caller, released with the matching
 * *_free function. Strings returned through char** are released with
 * cocoba_string_free. */
#ifndef COCOBA_H_
#define COCOBA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(COCOBA_BUILDING)
#define COCOBA_API __attribute__((visibility("default")))
#else
#define COCOBA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cocoba_status {
  COCOBA_OK = 0,
  COCOBA_ERR_INVALID_ARGUMENT = 1,
  COCOBA_ERR_MISSING_TERM = 2,
  COCOBA_ERR_INSUFFICIENT_DATA = 3,
  COCOBA_ERR_FORMAT = 4,
  COCOBA_ERR_DIM_MISMATCH = 5,
  COCOBA_ERR_DUPLICATE_ID = 6,
  COCOBA_ERR_COVERAGE = 7,
  COCOBA_ERR_DEGENERATE_SET = 8,
  COCOBA_ERR_EMPTY_SET = 9,
  COCOBA_ERR_NON_POSITIVE_BANDWIDTH = 10,
  COCOBA_ERR_UNDEFINED_BANDWIDTH = 11,
  COCOBA_ERR_EMPTY_LABELED_POOL = 12,
  COCOBA_ERR_EMPTY_UNLABELED_POOL = 13,
  COCOBA_ERR_NO_CONTENTION = 14,
  COCOBA_ERR_UNKNOWN_ID = 15,
  COCOBA_ERR_ALREADY_LABELED = 16,
  COCOBA_ERR_ID_MISMATCH = 17,
  COCOBA_ERR_INSUFFICIENT_SEEDS = 18,
  COCOBA_ERR_ORACLE_MISS = 19,
  COCOBA_ERR_IO = 20,
  COCOBA_ERR_STALE_QUERY = 21,
  COCOBA_ERR_INTERNAL = 99
} cocoba_status;

typedef struct cocoba_dataset cocoba_dataset;
typedef struct cocoba_snapshot cocoba_snapshot;
typedef struct cocoba_engine cocoba_engine;
typedef struct cocoba_service cocoba_service;

COCOBA_API const char* cocoba_version(void);
COCOBA_API const char* cocoba_last_error(void);
COCOBA_API const char* cocoba_status_name(cocoba_status status);
COCOBA_API void cocoba_string_free(char* s);

/* Datasets: JSON Lines postings plus the sidecar metadata file. */
COCOBA_API cocoba_status cocoba_dataset_load(const char* jsonl_path, const char* meta_path,
                                             cocoba_dataset** out);
COCOBA_API size_t cocoba_dataset_size(const cocoba_dataset* dataset);
/* Replaces every query-term occurrence with <QTERM>. */
COCOBA_API cocoba_status cocoba_dataset_canonicalize(const cocoba_dataset* dataset,
                                                     cocoba_dataset** out);
COCOBA_API cocoba_status cocoba_dataset_save(const cocoba_dataset* dataset,
                                             const char* jsonl_path, const char* meta_path);
COCOBA_API void cocoba_dataset_free(cocoba_dataset* dataset);

/* Embedding snapshots (binary CVEC1 or JSON Lines). */
COCOBA_API cocoba_status cocoba_snapshot_load(const char* path, cocoba_snapshot** out);
COCOBA_API cocoba_status cocoba_snapshot_write(const cocoba_snapshot* snapshot,
                                               const char* path);
COCOBA_API cocoba_status cocoba_snapshot_hash_embed(const cocoba_dataset* canonical_dataset,
                                                    uint32_t doc_dim, uint32_t word_dim,
                                                    uint32_t window, cocoba_snapshot** out);
COCOBA_API cocoba_status cocoba_snapshot_info(const cocoba_snapshot* snapshot, size_t* count,
                                              uint32_t* doc_dim, uint32_t* word_dim,
                                              uint64_t* epoch);
COCOBA_API void cocoba_snapshot_free(cocoba_snapshot* snapshot);

/* Engine: one active-learning loop over a cold-start split of the dataset.
 * config_json holds engine settings ("strategy", "estimators",
 * "subsample_ratio", "bandwidth_doc", "bandwidth_word", "epochs", ...) and
 * may be NULL for defaults. */
COCOBA_API cocoba_status cocoba_engine_create(const cocoba_dataset* dataset,
                                              const cocoba_snapshot* snapshot,
                                              const char* config_json, uint32_t cold_start,
                                              uint64_t seed, cocoba_engine** out);
COCOBA_API cocoba_status cocoba_engine_restore(const cocoba_dataset* dataset,
                                               const cocoba_snapshot* snapshot,
                                               const char* checkpoint_json,
                                               cocoba_engine** out);
/* Pending query id; *score receives its aggregate score and *fallback is set
 * to 1 when no bag had contention points. Either pointer may be NULL. */
COCOBA_API cocoba_status cocoba_engine_next_query(cocoba_engine* engine, char** id_out,
                                                  double* score, int* fallback);
COCOBA_API cocoba_status cocoba_engine_commit(cocoba_engine* engine, const char* id, int label);
COCOBA_API cocoba_status cocoba_engine_predict(cocoba_engine* engine, const char* id,
                                               int* label_out);
COCOBA_API cocoba_status cocoba_engine_swap_snapshot(cocoba_engine* engine,
                                                     const cocoba_snapshot* snapshot);
COCOBA_API cocoba_status cocoba_engine_pool_counts(const cocoba_engine* engine,
                                                   size_t* labeled, size_t* unlabeled,
                                                   size_t* test);
COCOBA_API cocoba_status cocoba_engine_checkpoint(const cocoba_engine* engine, char** json_out);
COCOBA_API void cocoba_engine_free(cocoba_engine* engine);

/* Harness. spec_json mirrors the al-bench run flags; the summary JSON is
 * returned and also written to <out>/summary.json. */
COCOBA_API cocoba_status cocoba_experiment_run(const char* spec_json, char** summary_out);
COCOBA_API cocoba_status cocoba_synth_generate(const char* spec_json, const char* out_dir);

/* Annotation service. options_json: {"strategy", "state_dir", "static_dir",
 * "options": {cell options}}. listen blocks until cocoba_service_stop. */
COCOBA_API cocoba_status cocoba_service_create(const cocoba_dataset* dataset,
                                               const cocoba_snapshot* snapshot,
                                               const char* options_json,
                                               cocoba_service** out);
COCOBA_API cocoba_status cocoba_service_listen(cocoba_service* service, const char* host,
                                               int port);
COCOBA_API cocoba_status cocoba_service_stop(cocoba_service* service);
COCOBA_API void cocoba_service_free(cocoba_service* service);

#ifdef __cplusplus
}
#endif

#endif /* COCOBA_H_ */
