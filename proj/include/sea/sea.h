/* sea.h
 *
 * C interface to the sea pipeline.  A context holds one experiment
 * configuration (seed, output directory, per-stage settings); every stage
 * call reads and writes artifacts under the configured output directory,
 * exactly like the CLI subcommands.
 *
 * Every function that can fail returns an int status:
 *   0  ok
 *   1  validation error (bad arguments, contract violations)
 *   2  numeric error (divergence, NaN, failed numeric postconditions)
 *   3  I/O or format error
 * On failure sea_last_error() returns a message describing what happened;
 * the message lives inside the context and is overwritten by the next call.
 */

#ifndef SEA_H_
#define SEA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SEA_API __declspec(dllexport)
#else
#define SEA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct sea_ctx sea_ctx;

SEA_API const char* sea_version(void);

/* Context lifecycle.  A fresh context carries the built-in default
 * configuration. */
SEA_API sea_ctx* sea_ctx_new(void);
SEA_API void sea_ctx_free(sea_ctx* ctx);

/* Replaces the context's configuration from a JSON file / JSON text.
 * Missing keys keep their defaults. */
SEA_API int sea_ctx_load_config(sea_ctx* ctx, const char* path);
SEA_API int sea_ctx_set_config_json(sea_ctx* ctx, const char* json_text);

/* Overrides applied on top of the loaded configuration. */
SEA_API int sea_ctx_set_seed(sea_ctx* ctx, uint64_t seed);
SEA_API int sea_ctx_set_out_dir(sea_ctx* ctx, const char* dir);

/* Canonical JSON dump of the current configuration.  Copies at most
 * buf_len bytes (including the terminator) into buf and stores the full
 * length at *needed if non-NULL; fails with status 1 when the buffer is
 * too small.  Call with buf NULL to query the size. */
SEA_API int sea_ctx_config_json(sea_ctx* ctx, char* buf, size_t buf_len,
                                size_t* needed);

/* Message for the most recent failed call, or "" after a success.  Never
 * NULL for a valid context. */
SEA_API const char* sea_last_error(const sea_ctx* ctx);

/* Pipeline stages.  Artifacts land under the configured output directory;
 * reruns with the same configuration reuse what already exists. */
SEA_API int sea_gen_corpus(sea_ctx* ctx);
SEA_API int sea_train(sea_ctx* ctx);
SEA_API int sea_train_encoder(sea_ctx* ctx);

/* method: "emb", "all", "enc", or NULL/"" for all three.
 * speaker_id: a held-out speaker id, or -1 for all held-out speakers.
 * demo_seconds: demonstration budget, or <= 0 for every configured size. */
SEA_API int sea_adapt(sea_ctx* ctx, const char* method, int speaker_id,
                      double demo_seconds);

/* Synthesizes with a saved voice, conditioned on a corpus utterance.
 * samples 0 uses the full conditioning length; temperature 0 is argmax.
 * out_wav NULL derives a name under <out_dir>/synth.  The written path is
 * copied into path_buf when non-NULL (fails with status 1 if it does not
 * fit). */
SEA_API int sea_synth(sea_ctx* ctx, const char* voice_path,
                      const char* utterance_id, int64_t samples,
                      double temperature, uint64_t seed, const char* out_wav,
                      char* path_buf, size_t path_buf_len);

typedef struct sea_eval_result {
  double real_eer;           /* EER of real held-out probes */
  double verifier_accuracy;  /* verifier holdout classification accuracy */
  double verifier_margin;    /* same-speaker minus cross-speaker cosine */
} sea_eval_result;

/* Runs the verification evaluation.  Scalar headline numbers are stored in
 * *result when non-NULL; the per-method tables, DET/ROC curves, and
 * d-vector dumps are written under <out_dir>/eval (see summary.json). */
SEA_API int sea_eval(sea_ctx* ctx, sea_eval_result* result);

/* Finite-difference gradient verification over every operator plus a full
 * model loss.  Stores the worst relative error at *max_rel_error when
 * non-NULL.  Status 2 when the check exceeds the 1e-4 tolerance. */
SEA_API int sea_grad_check(sea_ctx* ctx, uint64_t seed,
                           double* max_rel_error);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SEA_H_ */
