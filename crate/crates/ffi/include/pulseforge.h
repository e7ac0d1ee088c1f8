#ifndef PULSEFORGE_H
#define PULSEFORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Values 2 and 3 match the command-line exit codes.
typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_CONFIG = 2,
  PF_STATUS_NUMERIC = 3,
  PF_STATUS_INVALID_UTF8 = 4,
  PF_STATUS_PANIC = 5,
} PfStatus;

// DRAG variant selector.
typedef enum PfVariant {
  PF_VARIANT_DRAG_L = 0,
  PF_VARIANT_DRAG_P = 1,
  PF_VARIANT_NO_DRAG = 2,
} PfVariant;

// Calibrated native π/2 pulse handle.
typedef struct PfCalibrated PfCalibrated;

// Transmon model handle.
typedef struct PfModel PfModel;

// Uncalibrated pulse handle: envelope and DRAG setting.
typedef struct PfPulse PfPulse;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *pf_version(void);

// Copies the calling thread's last error message into `buf` (truncated, always NUL-terminated).
//
// Returns the full message length in bytes, excluding the terminator; 0 when there is none.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t pf_last_error(char *buf, size_t len);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library that was not freed yet.
void pf_string_free(char *s);

// Reference transmon model (4 levels, α/2π = −212 MHz, T1 = 35 μs, T_φ = 40 μs, n̄ = 0.02).
//
// # Safety
// `out` must point to writable storage for one pointer.
enum PfStatus pf_model_default(struct PfModel **out);

// Parses a model document (`{"schema": "pulseforge.model/1", "model": {...}}`).
//
// # Safety
// `json` must be a NUL-terminated string; `out` must point to writable storage for one pointer.
enum PfStatus pf_model_from_json(const char *json, struct PfModel **out);

// # Safety
// `model` must be null or a handle from this library that was not freed yet.
void pf_model_free(struct PfModel *model);

// Raised-cosine pulse of duration `t_p` (s) for rotation `theta` (rad); `alpha_hz` is α/2π.
//
// # Safety
// `out` must point to writable storage for one pointer.
enum PfStatus pf_pulse_cosine(double t_p,
                              double theta,
                              double alpha_hz,
                              enum PfVariant variant,
                              struct PfPulse **out);

// FAST pulse with bands from the anharmonicity heuristic.
//
// # Safety
// `out` must point to writable storage for one pointer.
enum PfStatus pf_pulse_fast_heuristic(double t_p,
                                      double theta,
                                      double alpha_hz,
                                      enum PfVariant variant,
                                      struct PfPulse **out);

// HD DRAG pulse with a `k`-fold spectral zero at |α|/2π.
//
// # Safety
// `out` must point to writable storage for one pointer.
enum PfStatus pf_pulse_hd(double t_p,
                          double theta,
                          double alpha_hz,
                          size_t k,
                          enum PfVariant variant,
                          struct PfPulse **out);

// Parses a pulse document as written by `pulseforge synth`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must point to writable storage for one pointer.
enum PfStatus pf_pulse_from_json(const char *json, struct PfPulse **out);

// Serialises a pulse; release the string with [`pf_string_free`].
//
// # Safety
// `pulse` must be a live handle; `out` must point to writable storage for one pointer.
enum PfStatus pf_pulse_to_json(const struct PfPulse *pulse, char **out);

// Number of samples produced by [`pf_pulse_sample`] at interval `dt`.
//
// # Safety
// `pulse` must be a live handle; `len` must be writable.
enum PfStatus pf_pulse_sample_len(const struct PfPulse *pulse, double dt, size_t *len);

// Samples Ω_I and Ω_Q (rad/s) at interval `dt` into caller buffers of length `len`.
//
// `len` must equal the value reported by [`pf_pulse_sample_len`].
//
// # Safety
// `pulse` must be a live handle; `i_out` and `q_out` must hold `len` doubles.
enum PfStatus pf_pulse_sample(const struct PfPulse *pulse,
                              double dt,
                              double *i_out,
                              double *q_out,
                              size_t len);

// # Safety
// `pulse` must be null or a handle from this library that was not freed yet.
void pf_pulse_free(struct PfPulse *pulse);

// Runs the simulated calibration flow (variant taken from the pulse) with the given seed.
//
// # Safety
// `model` and `pulse` must be live handles; `out` must point to writable storage for one pointer.
enum PfStatus pf_calibrate(const struct PfModel *model,
                           const struct PfPulse *pulse,
                           uint64_t seed,
                           struct PfCalibrated **out);

// Parses a calibrated-pulse document as written by `pulseforge calibrate`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must point to writable storage for one pointer.
enum PfStatus pf_calibrated_from_json(const char *json, struct PfCalibrated **out);

// Serialises a calibrated pulse as a calibrated-pulse document.
//
// # Safety
// `pulse` must be a live handle; `out` must point to writable storage for one pointer.
enum PfStatus pf_calibrated_to_json(const struct PfCalibrated *pulse, char **out);

// Calibrated amplitude, β, drive frequency (Hz) and virtual-Z phase (rad); null outputs are skipped.
//
// # Safety
// `pulse` must be a live handle; non-null outputs must be writable.
enum PfStatus pf_calibrated_parameters(const struct PfCalibrated *pulse,
                                       double *amplitude,
                                       double *beta,
                                       double *drive_freq,
                                       double *virtual_z);

// Cardinal-state average error and leakage of one gate, integrated with `steps` steps per pulse.
//
// # Safety
// `model` and `pulse` must be live handles; `error` and `leakage` must be writable.
enum PfStatus pf_gate_metrics(const struct PfModel *model,
                              const struct PfCalibrated *pulse,
                              size_t steps,
                              double *error,
                              double *leakage);

// # Safety
// `pulse` must be null or a handle from this library that was not freed yet.
void pf_calibrated_free(struct PfCalibrated *pulse);

// Passes `len` I/Q samples through a single-term intra-quadrature line `1 + a e^{−t/τ}`.
//
// # Safety
// Input and output buffers must hold `len` doubles; outputs may alias inputs.
enum PfStatus pf_distort_intra(const double *i_in,
                               const double *q_in,
                               size_t len,
                               double dt,
                               double a,
                               double tau,
                               double *i_out,
                               double *q_out);

// Predistorts `len` I/Q samples for a single-term intra-quadrature line `1 + a e^{−t/τ}`.
//
// # Safety
// Input and output buffers must hold `len` doubles; outputs may alias inputs.
enum PfStatus pf_predistort_intra(const double *i_in,
                                  const double *q_in,
                                  size_t len,
                                  double dt,
                                  double a,
                                  double tau,
                                  double *i_out,
                                  double *q_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PULSEFORGE_H */
