#ifndef QPROBE_QPROBE_H
#define QPROBE_QPROBE_H

#include <stddef.h>

#if defined(_WIN32)
#define QPROBE_API __declspec(dllexport)
#else
#define QPROBE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qprobe_status {
  QPROBE_OK = 0,
  QPROBE_ERR_INVALID_ARGUMENT = 1,
  QPROBE_ERR_CONFIG = 2,
  QPROBE_ERR_INVARIANT = 3,
  QPROBE_ERR_IO = 4,
  QPROBE_ERR_INTERNAL = 5,
  /* validate ran to completion but a strict check failed */
  QPROBE_ERR_VALIDATION_FAILED = 6
} qprobe_status;

typedef struct qprobe_config qprobe_config;
typedef struct qprobe_trajectory qprobe_trajectory;
typedef struct qprobe_fisher qprobe_fisher;

typedef struct qprobe_metrics {
  double chi;
  double max_fq;
  double argmax_t_fq;
  double max_fc;
  double argmax_t_fc;
  double reference_max_fq;
  double reference_max_fc;
  double delta_fq;
  double delta_fc;
  double r_q;
  double r_c;
  int boundary_max;
} qprobe_metrics;

QPROBE_API const char* qprobe_version(void);

/* Message of the last failed call on this thread; "" after a success. */
QPROBE_API const char* qprobe_last_error(void);

QPROBE_API qprobe_status qprobe_config_load(const char* path, qprobe_config** out);
QPROBE_API qprobe_status qprobe_config_parse(const char* text, qprobe_config** out);
/* Adds or replaces one key; values are checked when a command resolves the config. */
QPROBE_API qprobe_status qprobe_config_set(qprobe_config* cfg, const char* key, const char* value);
QPROBE_API qprobe_status qprobe_config_check(const qprobe_config* cfg);
QPROBE_API void qprobe_config_free(qprobe_config* cfg);

/* Each writes its files into out_dir (created if missing). */
QPROBE_API qprobe_status qprobe_simulate(const qprobe_config* cfg, const char* out_dir);
QPROBE_API qprobe_status qprobe_fisher_run(const qprobe_config* cfg, const char* out_dir);
QPROBE_API qprobe_status qprobe_sweep(const qprobe_config* cfg, const char* out_dir, int jobs);
QPROBE_API qprobe_status qprobe_validate(const qprobe_config* cfg, const char* out_dir);

QPROBE_API qprobe_status qprobe_trajectory_compute(const qprobe_config* cfg, qprobe_trajectory** out);
QPROBE_API size_t qprobe_trajectory_size(const qprobe_trajectory* traj);
/* rho receives re/im of rho_pp, rho_pm, rho_mp, rho_mm (8 doubles). */
QPROBE_API qprobe_status qprobe_trajectory_sample(const qprobe_trajectory* traj, size_t i, double* t, double* rho);
/* r receives r_x, r_y, r_z. */
QPROBE_API qprobe_status qprobe_trajectory_bloch(const qprobe_trajectory* traj, size_t i, double* r);
QPROBE_API void qprobe_trajectory_free(qprobe_trajectory* traj);

QPROBE_API qprobe_status qprobe_fisher_compute(const qprobe_config* cfg, qprobe_fisher** out);
QPROBE_API size_t qprobe_fisher_size(const qprobe_fisher* f);
QPROBE_API qprobe_status qprobe_fisher_sample(const qprobe_fisher* f, size_t i, double* t, double* fc, double* fq,
                                              unsigned* flags);
QPROBE_API qprobe_status qprobe_fisher_metrics(const qprobe_fisher* f, qprobe_metrics* out);
QPROBE_API void qprobe_fisher_free(qprobe_fisher* f);

#ifdef __cplusplus
}
#endif

#endif
