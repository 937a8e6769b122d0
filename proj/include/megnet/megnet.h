/* SPDX-License-Identifier: Apache-2.0 */
#ifndef MEGNET_H
#define MEGNET_H

#include <stddef.h>

#if defined(_WIN32)
#define MEGNET_API __declspec(dllexport)
#else
#define MEGNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum megnet_status {
  MEGNET_OK = 0,
  MEGNET_E_PARAMETER = 1,
  MEGNET_E_DIMENSION = 2,
  MEGNET_E_FORMAT = 3,
  MEGNET_E_IO = 4,
  MEGNET_E_SINGULAR = 5,
  MEGNET_E_NONFINITE = 6,
  MEGNET_E_STABILITY = 7,
  MEGNET_E_CONTRACT = 8,
  MEGNET_E_INSUFFICIENT_SAMPLES = 9,
  MEGNET_E_NULL_ARGUMENT = 10,
  MEGNET_E_INTERNAL = 99
} megnet_status;

typedef struct megnet_options megnet_options;
typedef struct megnet_dataset megnet_dataset;
typedef struct megnet_model megnet_model;

/* Message of the last failing call on this thread; never NULL. */
MEGNET_API const char* megnet_last_error(void);
MEGNET_API const char* megnet_status_name(megnet_status status);
MEGNET_API const char* megnet_version(void);

/* Strings returned through char** belong to the caller. */
MEGNET_API void megnet_string_free(char* text);

MEGNET_API megnet_status megnet_options_create(megnet_options** out);
MEGNET_API void megnet_options_free(megnet_options* options);
MEGNET_API megnet_status megnet_options_set(megnet_options* options, const char* key, const char* value);
/* Keys already set with megnet_options_set keep their values. */
MEGNET_API megnet_status megnet_options_load(megnet_options* options, const char* path);
MEGNET_API megnet_status megnet_options_get(const megnet_options* options, const char* key, char** value);
MEGNET_API megnet_status megnet_options_dump(const megnet_options* options, char** text);
/* Key, default and help of the index-th option; MEGNET_E_PARAMETER past the end. */
MEGNET_API megnet_status megnet_option_info(size_t index, const char** key, const char** default_value,
                                            const char** help);

/* Subcommands; `report` receives the human-readable output. */
MEGNET_API megnet_status megnet_synth(const megnet_options* options, char** report);
MEGNET_API megnet_status megnet_train(const megnet_options* options, char** report);
MEGNET_API megnet_status megnet_eval(const megnet_options* options, char** report);
MEGNET_API megnet_status megnet_rtsim(const megnet_options* options, char** report);
MEGNET_API megnet_status megnet_interpret(const megnet_options* options, char** report);
MEGNET_API megnet_status megnet_describe(const megnet_options* options, char** report);

typedef struct megnet_dataset_info {
  size_t trials;
  size_t channels;
  size_t times;
  size_t classes;
  size_t subjects;
  double sample_rate_hz;
} megnet_dataset_info;

MEGNET_API megnet_status megnet_dataset_read(const char* path, megnet_dataset** out);
MEGNET_API megnet_status megnet_dataset_info_get(const megnet_dataset* dataset, megnet_dataset_info* info);
/* Copies trial `index` (channels x times, row-major) into `buffer`. */
MEGNET_API megnet_status megnet_dataset_epoch(const megnet_dataset* dataset, size_t index, double* buffer,
                                              size_t capacity, int* label, int* subject);
MEGNET_API void megnet_dataset_free(megnet_dataset* dataset);

MEGNET_API megnet_status megnet_model_read(const char* path, megnet_model** out);
MEGNET_API megnet_status megnet_model_write(const megnet_model* model, const char* path);
MEGNET_API megnet_status megnet_model_describe(const megnet_model* model, char** text);
MEGNET_API megnet_status megnet_model_parameter_count(const megnet_model* model, size_t* total, size_t* temporal);
MEGNET_API megnet_status megnet_model_predict(const megnet_model* model, const double* epoch, size_t channels,
                                              size_t times, int* label, double* probabilities, size_t n_probabilities);
MEGNET_API void megnet_model_free(megnet_model* model);

#ifdef __cplusplus
}
#endif

#endif
