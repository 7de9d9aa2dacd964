#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "audio/wavio.hpp"
#include "common/error.hpp"
#include "common/fsutil.hpp"
#include "corpus/corpus_io.hpp"
#include "harness/experiment.hpp"
#include "testutil.hpp"

using namespace sea;

namespace {

// Miniature end-to-end profile: tiny model, short budgets, 1536-sample
// utterances (long enough for both the verifier window and the encoder
// conv stack).
ExperimentConfig mini_cfg(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.out_dir = out_dir;
  cfg.corpus.frame_stride = 16;
  cfg.corpus.frames_per_utterance = 96;
  cfg.corpus.train_speakers = 3;
  cfg.corpus.heldout_speakers = 2;
  cfg.corpus.utterances_per_train_speaker = 6;
  cfg.corpus.utterances_per_heldout_speaker = 8;
  cfg.corpus.test_count = 2;
  cfg.model.quantization = 16;
  cfg.model.residual_channels = 6;
  cfg.model.skip_channels = 8;
  cfg.model.dilation_cycle = {1, 2, 4};
  cfg.model.embedding_dim = 4;
  cfg.model.frame_stride = 16;
  cfg.model.num_speakers = 3;
  cfg.train.steps = 60;
  cfg.train.log_interval = 0;
  cfg.verifier.num_speakers = 3;
  cfg.verifier_train.steps = 40;
  cfg.encoder.embedding_dim = 4;
  cfg.encoder_train.steps = 30;
  cfg.encoder_train.log_interval = 0;
  cfg.adapt.emb_steps = 30;
  cfg.adapt.emb_eval_interval = 10;
  cfg.adapt.all_steps = 10;
  cfg.adapt.eval_interval = 5;
  // One utterance is 0.384 s; the pool per speaker holds five demos.
  cfg.eval.demo_seconds = {0.8, 1.6};
  cfg.eval.synth_samples = 400;
  return cfg;
}

std::vector<std::string> tree_files(const std::string& root) {
  std::vector<std::string> rel;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      rel.push_back(std::filesystem::relative(e.path(), root).string());
    }
  }
  std::sort(rel.begin(), rel.end());
  return rel;
}

int count_lines(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  int n = 0;
  std::string line;
  while (std::getline(is, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("experiment config json round trips and tolerates sparse files") {
  ExperimentConfig cfg = mini_cfg("somewhere");
  nlohmann::json j = experiment_config_to_json(cfg);
  ExperimentConfig back = experiment_config_from_json(j);
  CHECK(experiment_config_to_json(back) == j);

  // Sparse configs keep defaults for everything absent.
  ExperimentConfig sparse =
      experiment_config_from_json(nlohmann::json{{"seed", 42}});
  ExperimentConfig defaults;
  CHECK(sparse.seed == 42);
  CHECK(sparse.out_dir == defaults.out_dir);
  CHECK(sparse.corpus.frame_stride == defaults.corpus.frame_stride);
  CHECK(sparse.train.steps == defaults.train.steps);
  CHECK(sparse.eval.demo_seconds == defaults.eval.demo_seconds);

  // An empty path means the built-in defaults.
  ExperimentConfig blank = load_experiment_config("");
  CHECK(blank.seed == defaults.seed);

  seatest::TempDir tmp("sea_cfg");
  write_text_file(tmp.sub("bad.json"), "{not json");
  CHECK_THROWS_AS(load_experiment_config(tmp.sub("bad.json")), IoError);
  write_text_file(tmp.sub("wrong.json"), "{\"seed\": \"not a number\"}");
  CHECK_THROWS_AS(load_experiment_config(tmp.sub("wrong.json")),
                  ValidationError);
  CHECK_THROWS_AS(load_experiment_config(tmp.sub("absent.json")), IoError);
}

TEST_CASE("config hash and stage seeds separate configurations") {
  ExperimentConfig cfg = mini_cfg("dir");
  const std::string h = config_hash(cfg);
  CHECK(h == config_hash(cfg));
  CHECK(h.size() == 8);  // crc32 hex

  ExperimentConfig other = cfg;
  other.train.steps += 1;
  CHECK(config_hash(other) != h);

  // Stage seeds: stable, distinct across stages, distinct across seeds.
  CHECK(cfg.stage_seed("train") == cfg.stage_seed("train"));
  std::set<uint64_t> seeds;
  for (const char* s : {"corpus", "model-init", "train", "verifier", "encoder",
                        "adapt", "eval"}) {
    seeds.insert(cfg.stage_seed(s));
  }
  CHECK(seeds.size() == 7);
  ExperimentConfig reseeded = cfg;
  reseeded.seed = 6;
  CHECK(reseeded.stage_seed("train") != cfg.stage_seed("train"));
}

TEST_CASE("config validation catches cross-module mismatches") {
  ExperimentConfig cfg = mini_cfg("dir");
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig bad = cfg;
  bad.model.frame_stride = 32;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.model.num_speakers = 4;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.verifier.num_speakers = 5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.encoder.embedding_dim = 8;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.corpus.frames_per_utterance = 4;  // shorter than the encoder span
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.eval.demo_seconds.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.eval.demo_seconds = {1.0, -0.5};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.eval.temperature = -1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("output paths are rooted in the experiment directory") {
  ExperimentConfig cfg = mini_cfg("exp");
  OutPaths paths = out_paths(cfg);
  CHECK(paths.corpus_dir() == "exp/corpus");
  CHECK(paths.model_ckpt() == "exp/model.seaw");
  CHECK(paths.manifest_path() == "exp/run_manifest.json");
  CHECK(paths.voice_path("all", 3, 1.5) == "exp/voices/voice_all_s3_1500ms.seaw");
  CHECK(paths.voice_path("enc", 12, 0.8) ==
        "exp/voices/voice_enc_s12_800ms.seaw");
}

TEST_CASE("corpus generation is deterministic across directories") {
  seatest::TempDir tmp("sea_gen");
  ExperimentConfig a = mini_cfg(tmp.sub("a"));
  ExperimentConfig b = mini_cfg(tmp.sub("b"));
  cmd_gen_corpus(a);
  cmd_gen_corpus(b);

  auto fa = tree_files(out_paths(a).corpus_dir());
  auto fb = tree_files(out_paths(b).corpus_dir());
  REQUIRE(fa == fb);
  REQUIRE(!fa.empty());
  for (const auto& rel : fa) {
    CHECK(seatest::same_bytes(path_join(out_paths(a).corpus_dir(), rel),
                              path_join(out_paths(b).corpus_dir(), rel)));
  }

  // 3 * 6 train + 2 * 8 held-out utterances.
  Corpus corpus = load_corpus(out_paths(a).corpus_dir());
  CHECK(corpus.utterances.size() == 34);
  CHECK(corpus.seed == a.stage_seed("corpus"));

  // The run manifest records the stage and the config identity.
  nlohmann::json manifest =
      nlohmann::json::parse(read_text_file(out_paths(a).manifest_path()));
  CHECK(manifest.at("config_hash") == config_hash(a));
  CHECK(manifest.at("stages").contains("gen-corpus"));
  CHECK(manifest.at("stages").at("gen-corpus").at("seed") ==
        a.stage_seed("corpus"));

  // Reusing the directory with a materially different config is refused.
  ExperimentConfig drifted = a;
  drifted.train.steps += 5;
  CHECK_THROWS_AS(cmd_gen_corpus(drifted), ValidationError);
}

TEST_CASE("pipeline stages run end to end in a scratch directory") {
  seatest::TempDir tmp("sea_pipe");
  ExperimentConfig cfg = mini_cfg(tmp.sub("exp"));
  OutPaths paths = out_paths(cfg);

  // Stages demand their inputs.
  CHECK_THROWS_AS(cmd_train(cfg), ValidationError);
  cmd_gen_corpus(cfg);

  cmd_train(cfg);
  CHECK(path_exists(paths.model_ckpt()));
  CHECK(count_lines(paths.train_trace()) == cfg.train.steps + 1);

  // A satisfied budget leaves the checkpoint untouched.
  std::string before = read_text_file(paths.model_ckpt());
  cmd_train(cfg);
  CHECK(read_text_file(paths.model_ckpt()) == before);

  // A different master seed no longer matches the on-disk corpus.
  ExperimentConfig reseeded = cfg;
  reseeded.seed = 77;
  CHECK_THROWS_AS(cmd_train(reseeded), ValidationError);

  cmd_train_encoder(cfg);
  CHECK(path_exists(paths.encoder_ckpt()));
  CHECK(path_exists(paths.verifier_ckpt()));
  CHECK(count_lines(paths.encoder_trace()) == cfg.encoder_train.steps + 1);

  // Adaptation: all methods, all sizes, both held-out speakers.
  CHECK_THROWS_AS(cmd_adapt(cfg, "nope", -1, 0.0), ValidationError);
  CHECK_THROWS_AS(cmd_adapt(cfg, "emb", -1, 99.0), ValidationError);  // pool too small
  CHECK_THROWS_AS(cmd_adapt(cfg, "emb", 0, 0.0), ValidationError);  // train speaker
  cmd_adapt(cfg, "", -1, 0.0);
  Corpus corpus = load_corpus(paths.corpus_dir());
  int voices = 0;
  for (const std::string& m : {"emb", "all", "enc"}) {
    for (double sec : cfg.eval.demo_seconds) {
      for (int sid : corpus.heldout_speaker_ids) {
        CHECK(path_exists(paths.voice_path(m, sid, sec)));
        ++voices;
      }
    }
  }
  CHECK(voices == 12);

  // Synthesis: deterministic at temperature zero, length capped.
  SynthRequest req;
  req.voice_path = paths.voice_path("emb", corpus.heldout_speaker_ids[0],
                                    cfg.eval.demo_seconds[0]);
  req.utterance_id = corpus.splits.at(corpus.heldout_speaker_ids[0]).test[0];
  req.samples = 300;
  req.temperature = 0.0;
  req.seed = 9;
  req.out_wav = tmp.sub("synth_a.wav");
  std::string out_a = cmd_synth(cfg, req);
  CHECK(out_a == req.out_wav);
  req.out_wav = tmp.sub("synth_b.wav");
  std::string out_b = cmd_synth(cfg, req);
  CHECK(seatest::same_bytes(out_a, out_b));
  Waveform wav = read_wav(out_a);
  CHECK(wav.samples.size() == 300);
  CHECK(wav.sample_rate == cfg.corpus.sample_rate);

  // A default output name lands under synth/.
  req.out_wav.clear();
  std::string derived = cmd_synth(cfg, req);
  CHECK(derived.rfind(paths.synth_dir(), 0) == 0);
  CHECK(path_exists(derived));

  SynthRequest missing = req;
  missing.voice_path = paths.voice_path("emb", 99, 1.0);
  CHECK_THROWS_AS(cmd_synth(cfg, missing), IoError);
  SynthRequest bad_utt = req;
  bad_utt.utterance_id = "spk99_utt999";
  CHECK_THROWS_AS(cmd_synth(cfg, bad_utt), ValidationError);

  // Evaluation covers every method and size with no gaps.
  EvalOutcome outcome = cmd_eval(cfg);
  CHECK(outcome.gaps.empty());
  CHECK(outcome.real_eer >= 0.0);
  CHECK(outcome.real_eer <= 1.0);
  for (const std::string& m : {"emb", "all", "enc"}) {
    REQUIRE(outcome.eer.count(m) == 1);
    CHECK(outcome.eer.at(m).size() == cfg.eval.demo_seconds.size());
    for (const auto& [ms, eer] : outcome.eer.at(m)) {
      CHECK(eer >= 0.0);
      CHECK(eer <= 1.0);
    }
    REQUIRE(outcome.auc.count(m) == 1);
    CHECK(outcome.auc.at(m) >= 0.0);
    CHECK(outcome.auc.at(m) <= 1.0);
  }

  // real row + 3 methods x 2 sizes.
  CHECK(count_lines(path_join(paths.eval_dir(), "eer_table.csv")) == 8);
  CHECK(path_exists(path_join(paths.eval_dir(), "summary.json")));
  CHECK(path_exists(path_join(paths.eval_dir(), "dvectors.seav")));
  for (const std::string& m : {"emb", "all", "enc"}) {
    CHECK(path_exists(path_join(paths.eval_dir(), "roc_" + m + ".csv")));
  }
  // One generated probe per method, size, and test utterance.
  int wavs = 0;
  for (const auto& e : std::filesystem::directory_iterator(
           path_join(paths.eval_dir(), "gen"))) {
    wavs += e.path().extension() == ".wav" ? 1 : 0;
  }
  CHECK(wavs == 24);

  // The generated probes respect the synthesis cap.
  nlohmann::json manifest =
      nlohmann::json::parse(read_text_file(paths.manifest_path()));
  for (const char* stage : {"gen-corpus", "train", "train-encoder", "adapt",
                            "eval"}) {
    CHECK(manifest.at("stages").contains(stage));
  }
}

TEST_CASE("gradient check suite stays within tolerance") {
  GradCheckOutcome outcome = run_grad_check_suite(1);
  CHECK(outcome.per_op.size() == 11);
  CHECK(outcome.max_rel_error <= 1e-4);
  double worst = 0.0;
  for (const auto& [name, err] : outcome.per_op) {
    CHECK(err <= 1e-4);
    worst = std::max(worst, err);
  }
  CHECK(outcome.max_rel_error == worst);
}
