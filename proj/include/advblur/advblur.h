#ifndef ADVBLUR_ADVBLUR_H
#define ADVBLUR_ADVBLUR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ADVBLUR_API __declspec(dllexport)
#else
#define ADVBLUR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Return codes; they double as process exit codes for the command-line tool. */
typedef enum advblur_status {
  ADVBLUR_OK = 0,
  ADVBLUR_ERR_VALIDATION = 1, /* bad config, arguments or inputs */
  ADVBLUR_ERR_RUNTIME = 2,    /* I/O, numeric or other runtime failure */
  ADVBLUR_ERR_ACCEPTANCE = 3  /* reproduce: at least one criterion failed */
} advblur_status;

typedef struct advblur_config advblur_config;
typedef struct advblur_detector advblur_detector;

/* Receives one line of text (no trailing newline). */
typedef void (*advblur_log_fn)(const char* line, void* user);

typedef struct advblur_overrides {
  int has_seed;       /* nonzero: `seed` wins over ADVBLUR_SEED and the config */
  uint64_t seed;
  const char* out;    /* NULL keeps the configured output directory */
  const char* regime; /* NULL keeps the configured regime */
} advblur_overrides;

ADVBLUR_API const char* advblur_version(void);
/* Message of the last failed call on this thread; empty when none. */
ADVBLUR_API const char* advblur_last_error(void);
ADVBLUR_API void advblur_string_free(char* s);

/* ---- configuration ---- */
ADVBLUR_API advblur_status advblur_config_default(advblur_config** out);
ADVBLUR_API advblur_status advblur_config_load(const char* path, advblur_config** out);
ADVBLUR_API advblur_status advblur_config_parse(const char* json_text, advblur_config** out);
/* Applies overrides and ADVBLUR_SEED (flag > environment > config), then validates. */
ADVBLUR_API advblur_status advblur_config_apply(advblur_config* cfg, const advblur_overrides* o);
ADVBLUR_API advblur_status advblur_config_seed(const advblur_config* cfg, uint64_t* seed);
/* Effective configuration as JSON; free with advblur_string_free. */
ADVBLUR_API advblur_status advblur_config_to_json(const advblur_config* cfg, char** json_out);
ADVBLUR_API void advblur_config_free(advblur_config* cfg);

/* ---- commands; output directories are returned through `dir_out` when non-NULL ---- */
ADVBLUR_API advblur_status advblur_synth(const advblur_config* cfg, advblur_log_fn log, void* user);
ADVBLUR_API advblur_status advblur_train(const advblur_config* cfg, advblur_log_fn log, void* user, char** dir_out);
ADVBLUR_API advblur_status advblur_attack(const advblur_config* cfg, const char* const* checkpoints, size_t n,
                                          advblur_log_fn log, void* user, char** dir_out);
ADVBLUR_API advblur_status advblur_eval(const advblur_config* cfg, const char* const* checkpoints, size_t n,
                                        advblur_log_fn log, void* user, char** dir_out);
ADVBLUR_API advblur_status advblur_grad_check(const advblur_config* cfg, advblur_log_fn log, void* user,
                                              char** dir_out);
/* Runs the acceptance criteria (all when n_only == 0); one result line per criterion goes to `results`. */
ADVBLUR_API advblur_status advblur_reproduce(const advblur_config* cfg, const char* const* only, size_t n_only,
                                             advblur_log_fn progress, advblur_log_fn results, void* user);

/* ---- models and primitives; images are channel-major doubles in [0,1] ---- */
ADVBLUR_API advblur_status advblur_detector_load(const char* checkpoint, advblur_detector** out);
ADVBLUR_API advblur_status advblur_detector_score(const advblur_detector* d, const double* image, int channels,
                                                  int height, int width, double* fake_probability);
ADVBLUR_API void advblur_detector_free(advblur_detector* d);

/* Per-pixel Gaussian blur; `sigma` holds height*width entries, boundary is reflect|replicate|zero. */
ADVBLUR_API advblur_status advblur_blur_apply(const double* image, int channels, int height, int width,
                                              const double* sigma, int kernel, const char* boundary, int normalize,
                                              double* out);
ADVBLUR_API advblur_status advblur_auc(const double* scores, const int* labels, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
