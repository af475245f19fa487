#ifndef SPS_H
#define SPS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SpsStatus {
  SPS_STATUS_OK = 0,
  SPS_STATUS_NULL_POINTER = 1,
  SPS_STATUS_INVALID_ARGUMENT = 2,
  // A solver failed or a quantity did not converge.
  SPS_STATUS_NUMERICAL = 3,
  // The output buffer length does not match.
  SPS_STATUS_BUFFER_SIZE = 4,
  // Internal panic caught at the boundary.
  SPS_STATUS_INTERNAL = 5,
} SpsStatus;

// Observed channel of a hyperfine model.
typedef enum SpsChannelKind {
  // Single transition `|F_g, m_g⟩ ← |F_e, m_e⟩`.
  SPS_CHANNEL_KIND_TRANSITION = 0,
  // All decays emitting polarization `q`.
  SPS_CHANNEL_KIND_POLARIZATION = 1,
} SpsChannelKind;

// Opaque model handle.
typedef struct SpsScenario SpsScenario;

// `F_g → F_e` emitter parameters.
typedef struct SpsHyperfine {
  int32_t f_g_twice;
  int32_t f_e_twice;
  double omega_l;
  int32_t q_laser;
  double omega_b;
  double gamma;
  double delta_e;
  enum SpsChannelKind channel;
  // `2m_g` and `2m_e` for [`SpsChannelKind::Transition`].
  int32_t m_g_twice;
  int32_t m_e_twice;
  // Polarization for [`SpsChannelKind::Polarization`].
  int32_t q;
} SpsHyperfine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length of the message of the last failure on this thread, including the
// terminating NUL; 0 when there is none.
size_t sps_last_error_length(void);

// Copies the last failure message into `buf` (NUL-terminated, truncated to
// `len`). Returns the full length including the NUL, or 0 if there is none.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t sps_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *sps_version(void);

// Λ emitter observed on its `e → a` transition.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum SpsStatus sps_lambda_new(double omega,
                              double omega_r,
                              double gamma1,
                              double gamma2,
                              double delta_e,
                              struct SpsScenario **out);

// `F_g = 1 → F_e = 0` emitter with laser coupling `v_eg`, observed on
// `|1, m_g⟩ ← |0, 0⟩`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum SpsStatus sps_rb87_new(double v_eg, double omega_b, int32_t m_g, struct SpsScenario **out);

// General hyperfine emitter.
//
// # Safety
// `spec` must point to a valid [`SpsHyperfine`]; `out` to a handle slot.
enum SpsStatus sps_hyperfine_new(const struct SpsHyperfine *spec, struct SpsScenario **out);

// New handle: `base` with a detector mode on its observed channel.
//
// # Safety
// `base` must be a live handle; `out` a valid handle slot.
enum SpsStatus sps_scenario_with_detector(const struct SpsScenario *base,
                                          double g,
                                          double kappa,
                                          double delta_s,
                                          uint32_t n_max,
                                          struct SpsScenario **out);

// Releases a handle; null is ignored.
//
// # Safety
// `h` must be null or a handle not yet freed.
void sps_scenario_free(struct SpsScenario *h);

// Hilbert-space dimension of the model (emitter times detector levels).
//
// # Safety
// `h` must be null or a live handle.
size_t sps_scenario_dim(const struct SpsScenario *h);

// Steady-state density matrix, column-major, into `re` and `im`, each of
// length `len = dim²`.
//
// # Safety
// `h` must be a live handle; `re`/`im` must hold `len` values.
enum SpsStatus sps_steady_state(const struct SpsScenario *h, double *re, double *im, size_t len);

// Incoherent spectrum of the observed channel at `n` frequencies; the
// coherent weight goes to `coherent_weight` when it is non-null.
//
// # Safety
// `h` must be a live handle; `omegas` and `out` must hold `n` values.
enum SpsStatus sps_emission_spectrum(const struct SpsScenario *h,
                                     const double *omegas,
                                     size_t n,
                                     double *out,
                                     double *coherent_weight);

// Normalized `g²(τ)` of the observed channel; `taus` must start at 0 and
// increase strictly.
//
// # Safety
// `h` must be a live handle; `taus` and `out` must hold `n` values.
enum SpsStatus sps_g2(const struct SpsScenario *h, const double *taus, size_t n, double *out);

// Zero-delay `g²` of the detector mode of a handle built with
// [`sps_scenario_with_detector`].
//
// # Safety
// `h` must be a live handle; `out` a writable value.
enum SpsStatus sps_detector_g2_zero(const struct SpsScenario *h, double *out);

// Wigner 3-j symbol with every argument given as twice its value.
//
// # Safety
// `out` must be a writable value.
enum SpsStatus sps_wigner_3j(int32_t j1_twice,
                             int32_t j2_twice,
                             int32_t j3_twice,
                             int32_t m1_twice,
                             int32_t m2_twice,
                             int32_t m3_twice,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPS_H */
