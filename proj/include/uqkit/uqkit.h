#ifndef UQKIT_UQKIT_H
#define UQKIT_UQKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define UQ_API __declspec(dllexport)
#elif defined(__GNUC__)
#define UQ_API __attribute__((visibility("default")))
#else
#define UQ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns a status; on failure the thread-local last error holds
 * the error kind and a message. Strings returned through char** are owned by
 * the caller and released with uq_string_free. */
typedef enum uq_status {
  UQ_OK = 0,
  UQ_ERR_CONFIG = 1,
  UQ_ERR_DATA = 2,
  UQ_ERR_NUMERIC = 3,
  UQ_ERR_TASK_MISMATCH = 4,
  UQ_ERR_UNREACHABLE = 5,
  UQ_ERR_INTERNAL = 6
} uq_status;

typedef struct uq_dataset uq_dataset;
typedef struct uq_model uq_model;
typedef struct uq_prediction uq_prediction;

UQ_API const char* uq_version(void);
UQ_API const char* uq_status_name(uq_status status);
UQ_API const char* uq_last_error_message(void);
UQ_API const char* uq_last_error_kind(void);
UQ_API void uq_string_free(char* s);

/* {"algorithms":[{"id":..,"tasks":[..]}],"metrics":[{"name":..,"task":..,"greater_is_better":..}]} */
UQ_API uq_status uq_registry_json(char** out_json);

/* task: "regression" or "classification"; n_classes 0 infers max(label)+1. */
UQ_API uq_status uq_dataset_read_csv(const char* path, const char* target_column, const char* task, size_t n_classes,
                                     uq_dataset** out);
/* features: n x d row-major. */
UQ_API uq_status uq_dataset_from_arrays(const double* features, size_t n, size_t d, const double* target,
                                        const char* task, size_t n_classes, uq_dataset** out);
UQ_API uq_status uq_dataset_shape(const uq_dataset* data, size_t* rows, size_t* cols);
UQ_API uq_status uq_dataset_hash(const uq_dataset* data, uint64_t* out);
UQ_API uq_status uq_dataset_to_csv(const uq_dataset* data, const char* target_column, char** out_csv);
UQ_API void uq_dataset_free(uq_dataset* data);

/* estimator_json: {"algorithm_id": "...", "params": {...}, "standardize": false} */
UQ_API uq_status uq_model_fit_json(const char* estimator_json, const uq_dataset* train, uint64_t seed, uq_model** out);
UQ_API uq_status uq_model_save(const uq_model* model, const char* path);
UQ_API uq_status uq_model_load(const char* path, uq_model** out);
UQ_API uq_status uq_model_serialize(const uq_model* model, char** out_text);
/* algorithm_id, task, n_classes, feature_names, n, d, interval_mass, final_objective */
UQ_API uq_status uq_model_info_json(const uq_model* model, char** out_json);
/* Reads a CSV with the model's feature columns (any order) plus the target column. */
UQ_API uq_status uq_model_read_dataset(const uq_model* model, const char* path, const char* target_column,
                                       uq_dataset** out);
UQ_API void uq_model_free(uq_model* model);

UQ_API uq_status uq_model_predict(const uq_model* model, const uq_dataset* data, uq_prediction** out);
/* Selects the model's feature columns by name; other columns are ignored. */
UQ_API uq_status uq_model_predict_csv(const uq_model* model, const char* path, uq_prediction** out);
UQ_API uq_status uq_prediction_to_json(const uq_prediction* pred, char** out_json);
UQ_API uq_status uq_prediction_from_json(const char* json, uq_prediction** out);
UQ_API uq_status uq_prediction_to_csv(const uq_prediction* pred, char** out_csv);
UQ_API uq_status uq_prediction_rows(const uq_prediction* pred, size_t* rows);
UQ_API void uq_prediction_free(uq_prediction* pred);

/* metrics: comma-separated names, or NULL/"" for the task defaults. Output is
 * a JSON object name -> value. */
UQ_API uq_status uq_evaluate(const uq_prediction* pred, const uq_dataset* truth, const char* metrics, char** out_json);
/* kind: "ucc", "risk_rejection" or "reliability". */
UQ_API uq_status uq_curve_json(const uq_prediction* pred, const uq_dataset* truth, const char* kind, char** out_json);

/* method: "isotonic", "platt" or "interval-scale".
 * options_json: {"miss_rate": m} or {"bandwidth": w} for interval-scale;
 * {"score": "logit"|"probability", "positive_class": 1} for the probability maps. */
UQ_API uq_status uq_recalibrate(const uq_prediction* pred, const uq_dataset* calibration, const char* method,
                                const char* options_json, char** out_map_json, uq_prediction** out);
UQ_API uq_status uq_apply_map(const char* map_json, const uq_prediction* pred, uq_prediction** out);

/* spec_json: {"algorithm_id", "params", "grid": {key: [values]}, "standardize"}
 * or {"configs": [{"algorithm_id", "params"}, ...]}. */
UQ_API uq_status uq_grid_search_json(const char* spec_json, const uq_dataset* data, const char* scorer, size_t folds,
                                     uint64_t seed, char** out_json);

/* options_json may be NULL: {"row", "dot_quantiles", "dot_bins", "reliability_bins", "ucc_normalization"} */
UQ_API uq_status uq_report(const uq_model* model, const uq_dataset* test, const char* out_dir,
                           const char* options_json, char** out_index_json);
/* style: "concise" or "detailed"; mass is used for regression only. */
UQ_API uq_status uq_summarize(const uq_prediction* pred, size_t row, const char* style, double mass, char** out_text);
UQ_API uq_status uq_render_svg(const char* plot_spec_json, char** out_svg);

#ifdef __cplusplus
}
#endif

#endif
