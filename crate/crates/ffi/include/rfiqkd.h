#ifndef RFIQKD_H
#define RFIQKD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfiStatus {
  RFI_STATUS_OK = 0,
  RFI_STATUS_NULL_POINTER = 1,
  RFI_STATUS_INVALID_ARGUMENT = 2,
  RFI_STATUS_DATA_ERROR = 3,
  RFI_STATUS_SOLVER_FAILED = 4,
  RFI_STATUS_IO = 5,
  RFI_STATUS_PANIC = 6,
} RfiStatus;

typedef enum RfiVariant {
  RFI_VARIANT_SIX = 0,
  RFI_VARIANT_FOUR = 1,
  RFI_VARIANT_THREE = 2,
  RFI_VARIANT_BB84 = 3,
} RfiVariant;

typedef enum RfiKeyMode {
  RFI_KEY_MODE_FINITE = 0,
  RFI_KEY_MODE_ASYMPTOTIC = 1,
} RfiKeyMode;

/**
 * Opaque channel model handle.
 */
typedef struct RfiChannel RfiChannel;

/**
 * Opaque counts handle.
 */
typedef struct RfiCounts RfiCounts;

/**
 * Observed error rates. Set entries a variant does not measure to NaN.
 */
typedef struct RfiErrorRates {
  double e_zz;
  double e_xx;
  double e_xy;
  double e_yx;
  double e_yy;
} RfiErrorRates;

/**
 * Source settings with ω = 0; the basis split follows the variant.
 */
typedef struct RfiSource {
  double pr_z;
  double p_mu;
  double p_nu;
  double mu;
  double nu;
  double n_pulses;
} RfiSource;

/**
 * Counts analysis result. `c_l` is NaN when no bound was computed.
 */
typedef struct RfiReport {
  double s_zz_0;
  double s_zz_1;
  double e_zz_1;
  double c_l;
  double i_e;
  double e_obs_zz;
  double key_length;
  double rate;
  /**
   * 0 ok, 1 no single-photon events, 2 QBER too high, 3 solver failed.
   */
  int32_t bound_status;
} RfiReport;

typedef struct RfiOptimum {
  double pr_z;
  double p_mu;
  double p_nu;
  double mu;
  double nu;
  double rate;
} RfiOptimum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *rfi_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rfi_version(void);

/**
 * New channel with the default device parameters at distance 0.
 */
struct RfiChannel *rfi_channel_new(void);

/**
 * # Safety
 * `channel` must come from [`rfi_channel_new`] and not be freed already. NULL is ignored.
 */
void rfi_channel_free(struct RfiChannel *channel);

/**
 * Sets the fibre length and clears any fixed attenuation.
 *
 * # Safety
 * `channel` must be a live handle or NULL.
 */
enum RfiStatus rfi_channel_set_distance(struct RfiChannel *channel, double km);

/**
 * Fixes the total link attenuation in dB, overriding the distance.
 *
 * # Safety
 * `channel` must be a live handle or NULL.
 */
enum RfiStatus rfi_channel_set_attenuation(struct RfiChannel *channel, double db);

/**
 * Sets frame rotation, optical error, extra loss on Bob's Z arm in dB.
 *
 * # Safety
 * `channel` must be a live handle or NULL.
 */
enum RfiStatus rfi_channel_configure(struct RfiChannel *channel,
                                     double beta,
                                     double e_o,
                                     double z_excess_loss_db);

/**
 * C_L from observed error rates (error-rate mode of the SDP).
 *
 * # Safety
 * `rates` and `out` must be valid pointers or NULL.
 */
enum RfiStatus rfi_c_lower_bound(enum RfiVariant variant,
                                 const struct RfiErrorRates *rates,
                                 double *out);

/**
 * Reads a counts file. The new handle is written to `out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid or NULL.
 */
enum RfiStatus rfi_counts_read(const char *path, struct RfiCounts **out);

/**
 * Expected counts of the channel model for `source`.
 *
 * # Safety
 * `channel`, `source` and `out` must be valid pointers or NULL.
 */
enum RfiStatus rfi_counts_expected(enum RfiVariant variant,
                                   const struct RfiChannel *channel,
                                   const struct RfiSource *source,
                                   struct RfiCounts **out);

/**
 * # Safety
 * `counts` must come from this library and not be freed already. NULL is ignored.
 */
void rfi_counts_free(struct RfiCounts *counts);

/**
 * Decoy estimation, C_L and key rate for `counts`, with ε = 1e-10 and f = 1.16.
 *
 * # Safety
 * `counts`, `source` and `out` must be valid pointers or NULL.
 */
enum RfiStatus rfi_analyze_counts(enum RfiVariant variant,
                                  const struct RfiCounts *counts,
                                  const struct RfiSource *source,
                                  enum RfiKeyMode mode,
                                  struct RfiReport *out);

/**
 * Maximizes the key rate over (Pr_Z, p_μ, p_ν, μ, ν) for the channel.
 *
 * # Safety
 * `channel` and `out` must be valid pointers or NULL.
 */
enum RfiStatus rfi_optimize_rate(enum RfiVariant variant,
                                 const struct RfiChannel *channel,
                                 enum RfiKeyMode mode,
                                 double n_pulses,
                                 struct RfiOptimum *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RFIQKD_H */
