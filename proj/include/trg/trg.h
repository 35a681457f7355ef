/* C interface to the trg library. Every call returns a trg_status; on failure the message of
 * the most recent error on the calling thread is available from trg_last_error(). Objects are
 * opaque and released with their matching *_free function. */
#ifndef TRG_TRG_H
#define TRG_TRG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TRG_API __declspec(dllexport)
#else
#define TRG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum trg_status {
  TRG_OK = 0,
  TRG_ERR_INVALID_ARGUMENT = 1,
  TRG_ERR_SHAPE = 2,
  TRG_ERR_IO = 3,
  TRG_ERR_FORMAT = 4,
  TRG_ERR_MISMATCH = 5,
  TRG_ERR_NUMERIC = 6,
  TRG_ERR_STATE = 7,
  TRG_ERR_INTERNAL = 8
} trg_status;

typedef struct trg_metrics {
  double acc;
  double edit;
  double f1_10;
  double f1_25;
  double f1_50;
} trg_metrics;

typedef struct trg_config trg_config;
typedef struct trg_embeddings trg_embeddings;
typedef struct trg_graph trg_graph;

TRG_API const char* trg_version(void);
TRG_API const char* trg_status_name(trg_status status);
/* Empty string when the last call on this thread succeeded. */
TRG_API const char* trg_last_error(void);
/* "trace", "debug", "info", "warn", "error", "off" */
TRG_API trg_status trg_set_log_level(const char* level);
TRG_API void trg_string_free(char* s);

TRG_API trg_status trg_config_create(trg_config** out);
TRG_API trg_status trg_config_load(const char* path, trg_config** out);
/* Applies a partial JSON document on top of the current values. */
TRG_API trg_status trg_config_merge_json(trg_config* cfg, const char* json);
/* Caller frees *out with trg_string_free. */
TRG_API trg_status trg_config_to_json(const trg_config* cfg, char** out);
TRG_API void trg_config_free(trg_config* cfg);

TRG_API trg_status trg_embeddings_load(const char* path, trg_embeddings** out);
TRG_API trg_status trg_embeddings_shape(const trg_embeddings* e, size_t* rows, size_t* cols);
TRG_API void trg_embeddings_free(trg_embeddings* e);

/* metric: "l2", "l1", "cosine" (NULL = l2); normalization: "minmax", "zscore", "sigmoid" (NULL = minmax) */
TRG_API trg_status trg_graph_build(const trg_embeddings* e, const char* metric, const char* normalization,
                                   trg_graph** out);
TRG_API trg_status trg_graph_size(const trg_graph* g, size_t* n);
TRG_API trg_status trg_graph_value(const trg_graph* g, size_t i, size_t j, double* out);
/* Borrowed pointer, valid while g lives. */
TRG_API trg_status trg_graph_label(const trg_graph* g, size_t i, const char** out);
TRG_API trg_status trg_graph_save(const trg_graph* g, const char* path);
TRG_API void trg_graph_free(trg_graph* g);

/* Writes the synthetic dataset described by the config's synth section (on data.topology) to
 * out_dir, plus actions.trge with one simplex vertex per class in model.ct dimensions. */
TRG_API trg_status trg_synth_generate(const trg_config* cfg, const char* out_dir);

/* Trains and writes <data.out_dir>/model.trgw. *checkpoint may be NULL; otherwise the caller
 * frees it with trg_string_free. */
TRG_API trg_status trg_train(const trg_config* cfg, char** checkpoint);

/* out_dir may be NULL (no files written); threads 0 = TRG_THREADS or all cores. */
TRG_API trg_status trg_evaluate(const char* checkpoint, const char* data_dir, const char* out_dir, unsigned threads,
                                trg_metrics* out);

/* One pass of occlusion/rotation over a dataset directory; writes the augmented copy and
 * augment.json (what each sequence received). */
TRG_API trg_status trg_augment_dataset(const char* in_dir, const char* out_dir, double alpha, double beta,
                                       uint64_t seed);

/* ignore_class < 0 disables the ignored class. */
TRG_API trg_status trg_score_dirs(const char* pred_dir, const char* gt_dir, int ignore_class, trg_metrics* out);
TRG_API trg_status trg_metrics_compute(const int* pred, const int* gt, size_t frames, int ignore_class,
                                       trg_metrics* out);

#ifdef __cplusplus
}
#endif

#endif
