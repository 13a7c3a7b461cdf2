#ifndef PSA_H
#define PSA_H

#include <stddef.h>
#include <stdint.h>

typedef enum PsaStatus {
  PSA_STATUS_OK = 0,
  PSA_STATUS_NULL_ARGUMENT = 1,
  PSA_STATUS_INVALID_ARGUMENT = 2,
  PSA_STATUS_CONFIG = 3,
  PSA_STATUS_DATA = 4,
  PSA_STATUS_NUMERIC = 5,
  PSA_STATUS_PANIC = 6,
} PsaStatus;

/*
 Trained network loaded from a checkpoint.
 */
typedef struct PsaNetwork PsaNetwork;

/*
 Labeled scores for metric computation.
 */
typedef struct PsaScoreSet PsaScoreSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failure on this thread, or null if none. Valid
 until the next failing call on the same thread.
 */
const char *psa_last_error(void);

/*
 Library version, static storage.
 */
const char *psa_version(void);

/*
 Sample rate every waveform passed to this library must have.
 */
uint32_t psa_sample_rate(void);

/*
 Scores above this are bonafide.
 */
double psa_decision_threshold(void);

/*
 Load a checkpoint file into a new network handle.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PsaStatus psa_network_load(const char *path, struct PsaNetwork **out);

/*
 # Safety
 `net` must come from [`psa_network_load`] and not be used afterwards.
 */
void psa_network_free(struct PsaNetwork *net);

/*
 Samples the network consumes after preprocessing.

 # Safety
 `net` must be a live handle.
 */
size_t psa_network_input_length(const struct PsaNetwork *net);

/*
 Score a raw 16 kHz waveform: length standardization, z-score, forward
 pass. `score` receives P(bonafide) in (0, 1).

 # Safety
 `samples` must hold `len` values; `net` must be live; `score` writable.
 */
enum PsaStatus psa_network_score(const struct PsaNetwork *net,
                                 const double *samples,
                                 size_t len,
                                 uint32_t sample_rate,
                                 double *score);

/*
 Length standardization plus z-score into `out`, which must hold
 `out_len` values; `out_len` is the target length.

 # Safety
 `samples` must hold `len` values and `out` `out_len` writable values.
 */
enum PsaStatus psa_preprocess(const double *samples, size_t len, double *out, size_t out_len);

/*
 Build a score set from bonafide and spoof score arrays.

 # Safety
 Arrays must hold the stated number of values; `out` must be writable.
 */
enum PsaStatus psa_scores_new(const double *bonafide,
                              size_t n_bonafide,
                              const double *spoof,
                              size_t n_spoof,
                              struct PsaScoreSet **out);

/*
 # Safety
 `set` must come from [`psa_scores_new`] and not be used afterwards.
 */
void psa_scores_free(struct PsaScoreSet *set);

/*
 Equal error rate and the threshold where it occurs.

 # Safety
 `set` must be live; `eer` writable; `threshold` writable or null.
 */
enum PsaStatus psa_scores_eer(const struct PsaScoreSet *set, double *eer, double *threshold);

/*
 # Safety
 `set` must be live; `auc` writable.
 */
enum PsaStatus psa_scores_auc(const struct PsaScoreSet *set, double *auc);

/*
 Minimum normalized t-DCF under the default cost model.

 # Safety
 `set` must be live; `min_tdcf` writable.
 */
enum PsaStatus psa_scores_min_tdcf(const struct PsaScoreSet *set, double *min_tdcf);

double psa_cumulative_eer(double eer_la, double eer_pa);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSA_H */
