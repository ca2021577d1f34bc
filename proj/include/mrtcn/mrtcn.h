/* C interface to the multi-receptive-field temporal convolution toolkit.
 *
 * Every call returns an mrtcn_status. On failure the message of the most
 * recent error on the calling thread is available from mrtcn_last_error().
 * Strings returned through char** are heap allocated; release them with
 * mrtcn_string_free(). */
#ifndef MRTCN_MRTCN_H
#define MRTCN_MRTCN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MRTCN_API __declspec(dllexport)
#else
#define MRTCN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mrtcn_status {
    MRTCN_OK = 0,
    MRTCN_ERR_INVALID_ARGUMENT = 1,
    MRTCN_ERR_CONFIG = 2,
    MRTCN_ERR_IO = 3,
    MRTCN_ERR_FORMAT = 4,
    MRTCN_ERR_NUMERIC = 5,
    MRTCN_ERR_CHECK_FAILED = 6, /* gradcheck or rf agreement failed */
    MRTCN_ERR_INTERNAL = 7
} mrtcn_status;

typedef struct mrtcn_config mrtcn_config;
typedef struct mrtcn_model mrtcn_model;

/* Called once per progress line by train and ablate. */
typedef void (*mrtcn_log_fn)(const char* line, void* user);

MRTCN_API const char* mrtcn_version(void);
MRTCN_API const char* mrtcn_last_error(void);
MRTCN_API const char* mrtcn_status_name(mrtcn_status status);
MRTCN_API void mrtcn_string_free(char* s);
MRTCN_API void mrtcn_set_log_callback(mrtcn_log_fn fn, void* user);

/* Configuration. Keys are dotted ("train.iterations"); values are JSON text,
 * and bare words are taken as strings. */
MRTCN_API mrtcn_status mrtcn_config_default(mrtcn_config** out);
MRTCN_API mrtcn_status mrtcn_config_load(const char* path, mrtcn_config** out);
MRTCN_API mrtcn_status mrtcn_config_parse(const char* json, mrtcn_config** out);
MRTCN_API mrtcn_status mrtcn_config_set(mrtcn_config* cfg, const char* key, const char* json_value);
MRTCN_API mrtcn_status mrtcn_config_validate(const mrtcn_config* cfg);
MRTCN_API mrtcn_status mrtcn_config_dump(const mrtcn_config* cfg, char** json_out);
/* Every key with its default and a description. */
MRTCN_API mrtcn_status mrtcn_config_reference(char** text_out);
MRTCN_API void mrtcn_config_free(mrtcn_config* cfg);

/* Commands. summary_out may be NULL. */
MRTCN_API mrtcn_status mrtcn_synth(const mrtcn_config* cfg, const char* out_dir, char** summary_out);
/* resume_checkpoint may be NULL. */
MRTCN_API mrtcn_status mrtcn_train(const mrtcn_config* cfg, const char* data_dir, const char* out_dir,
                                   const char* resume_checkpoint, char** summary_out);
MRTCN_API mrtcn_status mrtcn_eval(const mrtcn_config* cfg, const char* checkpoint, const char* data_dir,
                                  const char* out_dir, char** summary_out);
MRTCN_API mrtcn_status mrtcn_spot(const mrtcn_config* cfg, const char* checkpoint, const char* data_dir,
                                  const char* out_dir, char** summary_out);
MRTCN_API mrtcn_status mrtcn_ablate(const mrtcn_config* cfg, const char* data_dir, const char* out_dir,
                                    char** summary_out);
/* Returns MRTCN_ERR_CHECK_FAILED, with the table still filled, when an
 * analytic receptive field disagrees with its probe. */
MRTCN_API mrtcn_status mrtcn_rf(const mrtcn_config* cfg, int first_block_only, char** table_out);
/* Returns MRTCN_ERR_CHECK_FAILED, with the table still filled, when any
 * registered op exceeds its tolerance. */
MRTCN_API mrtcn_status mrtcn_gradcheck(uint64_t seed, char** table_out);

/* Trained models. */
MRTCN_API mrtcn_status mrtcn_model_load(const char* checkpoint, mrtcn_model** out);
MRTCN_API size_t mrtcn_model_num_classes(const mrtcn_model* model);
MRTCN_API size_t mrtcn_model_window_len(const mrtcn_model* model);
MRTCN_API uint64_t mrtcn_model_iteration(const mrtcn_model* model);
MRTCN_API mrtcn_status mrtcn_model_spec(const mrtcn_model* model, char** canonical_out);
/* Per-second class probabilities for a feature file, written as CSV. */
MRTCN_API mrtcn_status mrtcn_model_predict(mrtcn_model* model, const char* features_path, char** csv_out);
MRTCN_API void mrtcn_model_free(mrtcn_model* model);

#ifdef __cplusplus
}
#endif

#endif
