#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <sea/sea.h>

#include "testutil.hpp"

namespace {

struct Ctx {
  sea_ctx* p;
  Ctx() : p(sea_ctx_new()) { REQUIRE(p != nullptr); }
  ~Ctx() { sea_ctx_free(p); }
  Ctx(const Ctx&) = delete;
  Ctx& operator=(const Ctx&) = delete;
};

std::string config_json(sea_ctx* ctx) {
  size_t needed = 0;
  REQUIRE(sea_ctx_config_json(ctx, nullptr, 0, &needed) == 0);
  REQUIRE(needed > 1);
  std::vector<char> buf(needed);
  REQUIRE(sea_ctx_config_json(ctx, buf.data(), buf.size(), nullptr) == 0);
  return std::string(buf.data());
}

// The unit_harness miniature profile, expressed as edits on the default
// configuration so the key names always match the library's serializer.
std::string mini_config_text(sea_ctx* ctx, const std::string& out_dir) {
  nlohmann::json j = nlohmann::json::parse(config_json(ctx));
  j["seed"] = 5;
  j["out_dir"] = out_dir;
  j["corpus"]["frame_stride"] = 16;
  j["corpus"]["frames_per_utterance"] = 96;
  j["corpus"]["train_speakers"] = 3;
  j["corpus"]["heldout_speakers"] = 2;
  j["corpus"]["utterances_per_train_speaker"] = 6;
  j["corpus"]["utterances_per_heldout_speaker"] = 8;
  j["corpus"]["test_count"] = 2;
  j["model"]["quantization"] = 16;
  j["model"]["residual_channels"] = 6;
  j["model"]["skip_channels"] = 8;
  j["model"]["dilation_cycle"] = {1, 2, 4};
  j["model"]["embedding_dim"] = 4;
  j["model"]["frame_stride"] = 16;
  j["model"]["num_speakers"] = 3;
  j["train"]["steps"] = 60;
  j["train"]["log_interval"] = 0;
  j["verifier"]["num_speakers"] = 3;
  j["verifier_train"]["steps"] = 40;
  j["encoder"]["embedding_dim"] = 4;
  j["encoder_train"]["steps"] = 30;
  j["encoder_train"]["log_interval"] = 0;
  j["adapt"]["emb_steps"] = 30;
  j["adapt"]["emb_eval_interval"] = 10;
  j["adapt"]["all_steps"] = 10;
  j["adapt"]["eval_interval"] = 5;
  j["eval"]["demo_seconds"] = {0.8};
  j["eval"]["synth_samples"] = 400;
  return j.dump();
}

}  // namespace

TEST_CASE("version and null-context handling") {
  CHECK(std::string(sea_version()) == "0.1.0");
  CHECK(std::string(sea_last_error(nullptr)) == "null context");
  CHECK(sea_ctx_load_config(nullptr, "x") == 1);
  CHECK(sea_gen_corpus(nullptr) == 1);
  CHECK(sea_grad_check(nullptr, 1, nullptr) == 1);

  Ctx c;
  CHECK(std::string(sea_last_error(c.p)) == "");
}

TEST_CASE("config ingestion and the buffer protocol") {
  Ctx c;

  // Size query, exact fit, and a too-small buffer.
  size_t needed = 0;
  CHECK(sea_ctx_config_json(c.p, nullptr, 0, &needed) == 0);
  REQUIRE(needed > 1);
  std::vector<char> buf(needed);
  CHECK(sea_ctx_config_json(c.p, buf.data(), buf.size(), nullptr) == 0);
  CHECK(std::strlen(buf.data()) == needed - 1);
  std::vector<char> tiny(needed - 1);
  CHECK(sea_ctx_config_json(c.p, tiny.data(), tiny.size(), nullptr) == 1);
  CHECK(std::string(sea_last_error(c.p)).find("buffer") != std::string::npos);

  // Feeding the dump back is a no-op round trip.
  std::string dump(buf.data());
  CHECK(sea_ctx_set_config_json(c.p, dump.c_str()) == 0);
  CHECK(config_json(c.p) == dump);

  // Overrides show up in the dump.
  CHECK(sea_ctx_set_seed(c.p, 321) == 0);
  CHECK(sea_ctx_set_out_dir(c.p, "elsewhere") == 0);
  nlohmann::json j = nlohmann::json::parse(config_json(c.p));
  CHECK(j.at("seed") == 321);
  CHECK(j.at("out_dir") == "elsewhere");
  CHECK(sea_ctx_set_out_dir(c.p, "") == 1);
  CHECK(sea_ctx_set_out_dir(c.p, nullptr) == 1);

  // Malformed payloads.
  CHECK(sea_ctx_set_config_json(c.p, "{oops") == 1);
  CHECK(std::string(sea_last_error(c.p)).find("parse") != std::string::npos);
  CHECK(sea_ctx_set_config_json(c.p, "{\"seed\": \"ten\"}") == 1);
  CHECK(std::string(sea_last_error(c.p)) != "");
  CHECK(sea_ctx_set_config_json(c.p, nullptr) == 1);

  // File-based loading.
  seatest::TempDir tmp("sea_capi_cfg");
  {
    std::ofstream os(tmp.sub("cfg.json"));
    os << "{\"seed\": 99}\n";
  }
  CHECK(sea_ctx_load_config(c.p, tmp.sub("cfg.json").c_str()) == 0);
  CHECK(nlohmann::json::parse(config_json(c.p)).at("seed") == 99);
  CHECK(sea_ctx_load_config(c.p, tmp.sub("absent.json").c_str()) == 3);
  CHECK(sea_ctx_load_config(c.p, nullptr) == 1);
}

TEST_CASE("pipeline through the C interface") {
  seatest::TempDir tmp("sea_capi");
  const std::string exp = tmp.sub("exp");
  Ctx c;
  REQUIRE(sea_ctx_set_config_json(c.p, mini_config_text(c.p, exp).c_str()) == 0);

  CHECK(sea_train(c.p) == 1);  // no corpus yet
  CHECK(std::string(sea_last_error(c.p)).find("gen-corpus") != std::string::npos);

  CHECK(sea_gen_corpus(c.p) == 0);
  CHECK(std::filesystem::exists(exp + "/corpus/manifest.json"));
  CHECK(sea_train(c.p) == 0);
  CHECK(std::filesystem::exists(exp + "/model.seaw"));
  CHECK(sea_train_encoder(c.p) == 0);
  CHECK(std::filesystem::exists(exp + "/encoder.seaw"));

  // A different master seed no longer matches the artifacts on disk.
  CHECK(sea_ctx_set_seed(c.p, 77) == 0);
  CHECK(sea_train(c.p) == 1);
  CHECK(std::string(sea_last_error(c.p)).find("seed") != std::string::npos);
  CHECK(sea_ctx_set_seed(c.p, 5) == 0);
  CHECK(sea_train(c.p) == 0);  // budget already satisfied

  // One adaptation cell per held-out speaker (ids 3 and 4).
  CHECK(sea_adapt(c.p, "emb", -1, 0.8) == 0);
  const std::string vpath = exp + "/voices/voice_emb_s3_800ms.seaw";
  CHECK(std::filesystem::exists(vpath));
  CHECK(std::filesystem::exists(exp + "/voices/voice_emb_s4_800ms.seaw"));
  CHECK(sea_adapt(c.p, "warp", -1, 0.8) == 1);
  CHECK(sea_adapt(c.p, "emb", -1, 99.0) == 1);  // pool too small

  // Synthesis round trip, deterministic at temperature zero.
  const std::string wav_a = tmp.sub("a.wav");
  const std::string wav_b = tmp.sub("b.wav");
  char path_buf[512];
  CHECK(sea_synth(c.p, vpath.c_str(), "spk03_utt000", 300, 0.0, 9,
                  wav_a.c_str(), path_buf, sizeof path_buf) == 0);
  CHECK(std::string(path_buf) == wav_a);
  CHECK(sea_synth(c.p, vpath.c_str(), "spk03_utt000", 300, 0.0, 9,
                  wav_b.c_str(), nullptr, 0) == 0);
  CHECK(seatest::same_bytes(wav_a, wav_b));
  char small[4];
  CHECK(sea_synth(c.p, vpath.c_str(), "spk03_utt000", 300, 0.0, 9,
                  wav_a.c_str(), small, sizeof small) == 1);

  CHECK(sea_synth(c.p, (exp + "/voices/absent.seaw").c_str(), "spk03_utt000",
                  300, 0.0, 9, wav_a.c_str(), nullptr, 0) == 3);
  CHECK(sea_synth(c.p, vpath.c_str(), "spk99_utt999", 300, 0.0, 9,
                  wav_a.c_str(), nullptr, 0) == 1);
  CHECK(std::string(sea_last_error(c.p)).find("spk99_utt999") !=
        std::string::npos);

  // Evaluation runs with only the emb voices present and reports headline
  // numbers; the remaining methods surface as gaps, not failures.
  sea_eval_result result{};
  CHECK(sea_eval(c.p, &result) == 0);
  CHECK(result.real_eer >= 0.0);
  CHECK(result.real_eer <= 1.0);
  CHECK(result.verifier_accuracy >= 0.0);
  CHECK(result.verifier_accuracy <= 1.0);
  CHECK(std::filesystem::exists(exp + "/eval/eer_table.csv"));
  CHECK(std::filesystem::exists(exp + "/eval/summary.json"));
}

TEST_CASE("gradient check through the C interface") {
  Ctx c;
  double err = 1.0;
  CHECK(sea_grad_check(c.p, 1, &err) == 0);
  CHECK(err <= 1e-4);
  CHECK(sea_grad_check(c.p, 1, nullptr) == 0);
}
