#ifndef VARWIND_VARWIND_H
#define VARWIND_VARWIND_H

/* C interface to the varwind library. Every call returns a vw_status; on
 * failure vw_last_error() describes the problem for the calling thread.
 * Strings returned through char** must be released with vw_string_free. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define VW_API __declspec(dllexport)
#else
#define VW_API __attribute__((visibility("default")))
#endif

typedef enum vw_status {
  VW_OK = 0,
  VW_ERR_INVALID_ARGUMENT = 1,
  VW_ERR_SHAPE = 2,
  VW_ERR_NUMERICAL = 3,
  VW_ERR_INGEST = 4,
  VW_ERR_MASK = 5,
  VW_ERR_CALIBRATION = 6,
  VW_ERR_CHECKPOINT = 7,
  VW_ERR_CONFIG = 8,
  VW_ERR_IO = 9,
  VW_ERR_INTERNAL = 10
} vw_status;

typedef struct vw_config vw_config;
typedef struct vw_run vw_run;
typedef struct vw_report vw_report;

typedef struct vw_synth_stats {
  double rmse;
  double r2;
  double max_wind;
  double ecmwf_noise;
} vw_synth_stats;

/* Called once per epoch, possibly from several threads at once. */
typedef void (*vw_progress_fn)(uint64_t seed, size_t phase, size_t epoch, double train_loss, double val_loss,
                               double wall_seconds, void* user);

VW_API const char* vw_version(void);
VW_API const char* vw_status_string(vw_status status);
VW_API const char* vw_last_error(void);
VW_API void vw_string_free(char* s);

/* configuration */
VW_API vw_status vw_config_default(vw_config** out);
VW_API vw_status vw_config_load(const char* path, vw_config** out);
VW_API vw_status vw_config_set(vw_config* cfg, const char* key, const char* value);
VW_API vw_status vw_config_get(const vw_config* cfg, const char* key, char** value);
VW_API vw_status vw_config_to_ini(const vw_config* cfg, char** text);
VW_API vw_status vw_config_hash(const vw_config* cfg, char** hash);
VW_API void vw_config_free(vw_config* cfg);

/* synthetic dataset; cfg may be NULL for the defaults, stats may be NULL */
VW_API vw_status vw_synth(size_t hours, uint64_t seed, const vw_config* cfg, const char* out_csv,
                          vw_synth_stats* stats);

/* training; seeds may be NULL (configured seeds), missing_frac < 0 keeps the configured value */
VW_API vw_status vw_train(const vw_config* cfg, const char* model, const uint64_t* seeds, size_t n_seeds,
                          double missing_frac, const char* config_path, vw_progress_fn progress, void* user,
                          vw_run** out);
VW_API const char* vw_run_dir(const vw_run* run);
VW_API const char* vw_run_config_hash(const vw_run* run);
VW_API size_t vw_run_checkpoint_count(const vw_run* run);
VW_API const char* vw_run_checkpoint(const vw_run* run, size_t index);
VW_API void vw_run_free(vw_run* run);

/* evaluation; data_csv and out_dir may be NULL, baseline_pb <= 0 keeps the configured value */
VW_API vw_status vw_eval(const char* const* checkpoints, size_t n_checkpoints, const char* data_csv,
                         double baseline_pb, const char* out_dir, vw_report** out);
VW_API double vw_report_n_median(const vw_report* report);
VW_API double vw_report_mean(const vw_report* report);
/* NaN with fewer than two runs */
VW_API double vw_report_std(const vw_report* report);
VW_API double vw_report_eta(const vw_report* report);
VW_API size_t vw_report_run_count(const vw_report* report);
VW_API double vw_report_seed_rmse(const vw_report* report, size_t index);
VW_API const char* vw_report_text(const vw_report* report);
VW_API const char* vw_report_out_dir(const vw_report* report);
VW_API void vw_report_free(vw_report* report);

/* consolidated table over every report below runs_dir */
VW_API vw_status vw_report_dir(const char* runs_dir, char** table);

#ifdef __cplusplus
}
#endif

#endif
