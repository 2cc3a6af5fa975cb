#ifndef SENTIGAN_H
#define SENTIGAN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_STRING = 2,
  SG_STATUS_DATA_ERROR = 3,
  SG_STATUS_USAGE_ERROR = 4,
  SG_STATUS_TRAINING_ERROR = 5,
  SG_STATUS_IO_ERROR = 6,
  SG_STATUS_PANIC = 7,
} SgStatus;

typedef enum SgModelKind {
  SG_MODEL_KIND_ARIMA = 0,
  SG_MODEL_KIND_LSTM = 1,
  SG_MODEL_KIND_GAN = 2,
} SgModelKind;

/*
 An aligned market and sentiment dataset.
 */
typedef struct SgDataset SgDataset;

/*
 A fitted model.
 */
typedef struct SgModel SgModel;

/*
 Held-out forecasts with their metrics.
 */
typedef struct SgReport SgReport;

/*
 Holdout error measures. `mape` is NaN when an actual value was zero.
 */
typedef struct SgMetrics {
  double mae;
  double mse;
  double rmse;
  double mape;
} SgMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/*
 Message for the last failed call on this thread, or an empty string.
 The pointer stays valid until the next call on the same thread.
 */
const char *sg_last_error(void);

/*
 VADER compound score of `utf8_text` with the bundled lexicon.

 # Safety
 `utf8_text` must be NUL-terminated; `compound` must be writable.
 */
enum SgStatus sg_sentiment_score(const char *utf8_text, double *compound);

/*
 Loads an OHLCV CSV, repairs gaps and aligns daily sentiment scored from
 an optional `timestamp,text` CSV (`tweets_path` may be null).

 # Safety
 String arguments must be NUL-terminated; `dataset` must be writable.
 */
enum SgStatus sg_dataset_load(const char *symbol,
                              const char *ohlcv_path,
                              const char *tweets_path,
                              struct SgDataset **dataset);

/*
 Number of trading days in `dataset`.

 # Safety
 `dataset` must come from [`sg_dataset_load`]; `len` must be writable.
 */
enum SgStatus sg_dataset_len(const struct SgDataset *dataset, size_t *len);

/*
 # Safety
 `dataset` must come from [`sg_dataset_load`] or be null.
 */
void sg_dataset_free(struct SgDataset *dataset);

/*
 Fits a model on the training partition of `dataset`. `settings_toml`
 may be null for defaults.

 # Safety
 `dataset` must be a live handle; `model` must be writable.
 */
enum SgStatus sg_model_train(const struct SgDataset *dataset,
                             enum SgModelKind kind,
                             const char *settings_toml,
                             uint64_t seed,
                             struct SgModel **model);

/*
 Writes `model` as JSON to `path`.

 # Safety
 `model` must be a live handle; `path` NUL-terminated.
 */
enum SgStatus sg_model_save(const struct SgModel *model, const char *path);

/*
 Reads a model written by [`sg_model_save`] or the CLI.

 # Safety
 `path` must be NUL-terminated; `model` must be writable.
 */
enum SgStatus sg_model_load(const char *path, struct SgModel **model);

/*
 # Safety
 `model` must come from this library or be null.
 */
void sg_model_free(struct SgModel *model);

/*
 One-step forecasts over the test partition the model was trained for.

 # Safety
 Handles must be live; `report` must be writable.
 */
enum SgStatus sg_model_evaluate(const struct SgModel *model,
                                const struct SgDataset *dataset,
                                struct SgReport **report);

/*
 Number of forecast rows in `report`.

 # Safety
 `report` must be live; `len` writable.
 */
enum SgStatus sg_report_len(const struct SgReport *report, size_t *len);

/*
 # Safety
 `report` must be live; `metrics` writable.
 */
enum SgStatus sg_report_metrics(const struct SgReport *report, struct SgMetrics *metrics);

/*
 Copies predicted and actual closes into caller buffers of `capacity`
 elements each; `capacity` must be at least [`sg_report_len`].

 # Safety
 Both buffers must hold `capacity` doubles.
 */
enum SgStatus sg_report_values(const struct SgReport *report,
                               double *predicted,
                               double *actual,
                               size_t capacity);

/*
 # Safety
 `report` must come from this library or be null.
 */
void sg_report_free(struct SgReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SENTIGAN_H */
