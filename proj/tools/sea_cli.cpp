// Command-line front end.  Deliberately a pure client of the C API: every
// pipeline operation goes through sea.h, so the CLI doubles as a live
// exercise of the shared library surface.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sea/sea.h"

namespace {

int finish(sea_ctx* ctx, int status) {
  if (status != 0) {
    std::fprintf(stderr, "error (%d): %s\n", status, sea_last_error(ctx));
  }
  sea_ctx_free(ctx);
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sea: few-shot adaptive speech synthesis pipeline"};
  app.require_subcommand(0, 1);

  std::string config_path;
  uint64_t seed_override = 0;
  std::string out_override;
  bool dump_config = false;
  app.add_option("--config", config_path, "experiment config JSON file");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_override, "master seed override");
  app.add_option("--out", out_override,
                 "output directory (overrides SEA_OUT_DIR and the config)");
  app.add_flag("--dump-config", dump_config,
               "print the resolved config as canonical JSON and exit");

  CLI::App* sc_gen =
      app.add_subcommand("gen-corpus", "generate the synthetic corpus");
  CLI::App* sc_train =
      app.add_subcommand("train", "train the multi-speaker model");
  CLI::App* sc_tenc = app.add_subcommand(
      "train-encoder", "train the demonstration encoder (joint with a model)");

  CLI::App* sc_adapt =
      app.add_subcommand("adapt", "fit voices for held-out speakers");
  std::string method;
  int speaker = -1;
  double demo_seconds = 0.0;
  sc_adapt->add_option("--method", method, "emb, all, or enc (default: all three)")
      ->check(CLI::IsMember({"emb", "all", "enc"}));
  sc_adapt->add_option("--speaker", speaker,
                       "held-out speaker id (default: every held-out speaker)");
  sc_adapt->add_option("--demo-seconds", demo_seconds,
                       "demonstration budget in seconds (default: every "
                       "configured size)");

  CLI::App* sc_synth =
      app.add_subcommand("synth", "synthesize speech with a saved voice");
  std::string voice_path, utterance_id, out_wav;
  int64_t samples = 0;
  double temperature = 1.0;
  uint64_t sample_seed = 1;
  sc_synth->add_option("--voice", voice_path, "voice file (from adapt)")
      ->required();
  sc_synth
      ->add_option("--utterance", utterance_id,
                   "corpus utterance id providing the conditioning")
      ->required();
  sc_synth->add_option("--samples", samples,
                       "cap on emitted samples (0 = full length)");
  sc_synth->add_option("--temperature", temperature,
                       "sampling temperature (0 = argmax)");
  sc_synth->add_option("--sample-seed", sample_seed, "sampling seed");
  sc_synth->add_option("--wav", out_wav, "output path (default under synth/)");

  CLI::App* sc_eval =
      app.add_subcommand("eval", "speaker-verification evaluation");
  CLI::App* sc_gc = app.add_subcommand(
      "grad-check", "finite-difference verification of every operator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  sea_ctx* ctx = sea_ctx_new();
  if (!ctx) {
    std::fprintf(stderr, "error: cannot allocate context\n");
    return 3;
  }

  if (!config_path.empty()) {
    int rc = sea_ctx_load_config(ctx, config_path.c_str());
    if (rc != 0) return finish(ctx, rc);
  }
  if (seed_opt->count() > 0) sea_ctx_set_seed(ctx, seed_override);
  if (!out_override.empty()) {
    sea_ctx_set_out_dir(ctx, out_override.c_str());
  } else if (const char* env = std::getenv("SEA_OUT_DIR")) {
    if (*env) sea_ctx_set_out_dir(ctx, env);
  }

  if (dump_config) {
    size_t needed = 0;
    int rc = sea_ctx_config_json(ctx, nullptr, 0, &needed);
    if (rc != 0) return finish(ctx, rc);
    std::vector<char> buf(needed);
    rc = sea_ctx_config_json(ctx, buf.data(), buf.size(), nullptr);
    if (rc != 0) return finish(ctx, rc);
    std::printf("%s\n", buf.data());
    return finish(ctx, 0);
  }
  if (app.get_subcommands().empty()) {
    std::fprintf(stderr, "%s\n", app.help().c_str());
    sea_ctx_free(ctx);
    return 1;
  }

  int rc = 0;
  if (sc_gen->parsed()) {
    rc = sea_gen_corpus(ctx);
  } else if (sc_train->parsed()) {
    rc = sea_train(ctx);
  } else if (sc_tenc->parsed()) {
    rc = sea_train_encoder(ctx);
  } else if (sc_adapt->parsed()) {
    rc = sea_adapt(ctx, method.c_str(), speaker, demo_seconds);
  } else if (sc_synth->parsed()) {
    rc = sea_synth(ctx, voice_path.c_str(), utterance_id.c_str(), samples,
                   temperature, sample_seed,
                   out_wav.empty() ? nullptr : out_wav.c_str(), nullptr, 0);
  } else if (sc_eval->parsed()) {
    sea_eval_result result{};
    rc = sea_eval(ctx, &result);
  } else if (sc_gc->parsed()) {
    double max_err = 0.0;
    rc = sea_grad_check(ctx, seed_opt->count() > 0 ? seed_override : 1,
                        &max_err);
  }
  return finish(ctx, rc);
}
