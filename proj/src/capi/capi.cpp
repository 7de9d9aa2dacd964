// C API shim: translates the exception-based C++ core into status codes
// and a per-context error message.

#include "sea/sea.h"

#include <cstring>
#include <exception>
#include <string>

#include "common/error.hpp"
#include "harness/experiment.hpp"

struct sea_ctx {
  sea::ExperimentConfig cfg;
  std::string last_error;
};

namespace {

template <typename Fn>
int guarded(sea_ctx* ctx, Fn&& fn) {
  if (!ctx) return 1;
  ctx->last_error.clear();
  try {
    return fn();
  } catch (const sea::Error& e) {
    ctx->last_error = e.what();
    return static_cast<int>(e.status());
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return 3;
  }
}

int fail(sea_ctx* ctx, int status, const char* msg) {
  if (ctx) ctx->last_error = msg;
  return status;
}

// Copies src into a caller buffer, NUL-terminated.  Reports the full
// required size (terminator included) regardless of fit.
int copy_out(sea_ctx* ctx, const std::string& src, char* buf, size_t buf_len,
             size_t* needed) {
  if (needed) *needed = src.size() + 1;
  if (!buf) return 0;
  if (buf_len < src.size() + 1)
    return fail(ctx, 1, "output buffer too small");
  std::memcpy(buf, src.c_str(), src.size() + 1);
  return 0;
}

}  // namespace

extern "C" {

const char* sea_version(void) { return "0.1.0"; }

sea_ctx* sea_ctx_new(void) {
  try {
    return new sea_ctx{};
  } catch (...) {
    return nullptr;
  }
}

void sea_ctx_free(sea_ctx* ctx) { delete ctx; }

int sea_ctx_load_config(sea_ctx* ctx, const char* path) {
  return guarded(ctx, [&] {
    if (!path) return fail(ctx, 1, "null config path");
    ctx->cfg = sea::load_experiment_config(path);
    return 0;
  });
}

int sea_ctx_set_config_json(sea_ctx* ctx, const char* json_text) {
  return guarded(ctx, [&] {
    if (!json_text) return fail(ctx, 1, "null config text");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      throw sea::ValidationError(std::string("cannot parse config JSON: ") +
                                 e.what());
    }
    try {
      ctx->cfg = sea::experiment_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw sea::ValidationError(std::string("bad config JSON: ") + e.what());
    }
    return 0;
  });
}

int sea_ctx_set_seed(sea_ctx* ctx, uint64_t seed) {
  return guarded(ctx, [&] {
    ctx->cfg.seed = seed;
    return 0;
  });
}

int sea_ctx_set_out_dir(sea_ctx* ctx, const char* dir) {
  return guarded(ctx, [&] {
    if (!dir || !*dir) return fail(ctx, 1, "null or empty output directory");
    ctx->cfg.out_dir = dir;
    return 0;
  });
}

int sea_ctx_config_json(sea_ctx* ctx, char* buf, size_t buf_len,
                        size_t* needed) {
  return guarded(ctx, [&] {
    const std::string dump = sea::experiment_config_to_json(ctx->cfg).dump(2);
    return copy_out(ctx, dump, buf, buf_len, needed);
  });
}

const char* sea_last_error(const sea_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

int sea_gen_corpus(sea_ctx* ctx) {
  return guarded(ctx, [&] {
    sea::cmd_gen_corpus(ctx->cfg);
    return 0;
  });
}

int sea_train(sea_ctx* ctx) {
  return guarded(ctx, [&] {
    sea::cmd_train(ctx->cfg);
    return 0;
  });
}

int sea_train_encoder(sea_ctx* ctx) {
  return guarded(ctx, [&] {
    sea::cmd_train_encoder(ctx->cfg);
    return 0;
  });
}

int sea_adapt(sea_ctx* ctx, const char* method, int speaker_id,
              double demo_seconds) {
  return guarded(ctx, [&] {
    sea::cmd_adapt(ctx->cfg, method ? method : "", speaker_id, demo_seconds);
    return 0;
  });
}

int sea_synth(sea_ctx* ctx, const char* voice_path, const char* utterance_id,
              int64_t samples, double temperature, uint64_t seed,
              const char* out_wav, char* path_buf, size_t path_buf_len) {
  return guarded(ctx, [&] {
    sea::SynthRequest req;
    req.voice_path = voice_path ? voice_path : "";
    req.utterance_id = utterance_id ? utterance_id : "";
    req.samples = samples;
    req.temperature = temperature;
    req.seed = seed;
    req.out_wav = out_wav ? out_wav : "";
    const std::string written = sea::cmd_synth(ctx->cfg, req);
    if (path_buf) return copy_out(ctx, written, path_buf, path_buf_len, nullptr);
    return 0;
  });
}

int sea_eval(sea_ctx* ctx, sea_eval_result* result) {
  return guarded(ctx, [&] {
    sea::EvalOutcome out = sea::cmd_eval(ctx->cfg);
    if (result) {
      result->real_eer = out.real_eer;
      result->verifier_accuracy = out.verifier_accuracy;
      result->verifier_margin = out.verifier_margin;
    }
    return 0;
  });
}

int sea_grad_check(sea_ctx* ctx, uint64_t seed, double* max_rel_error) {
  return guarded(ctx, [&] {
    sea::GradCheckOutcome out = sea::run_grad_check_suite(seed);
    if (max_rel_error) *max_rel_error = out.max_rel_error;
    if (out.max_rel_error > 1e-4)
      throw sea::NumericError("gradient check failed: max relative error " +
                              std::to_string(out.max_rel_error));
    return 0;
  });
}

}  // extern "C"
