#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adapt/adapt.hpp"
#include "adapt/encoder.hpp"
#include "corpus/corpus.hpp"
#include "eval/verifier.hpp"
#include "model/trainer.hpp"
#include "model/wavenet.hpp"

#include <nlohmann/json.hpp>

namespace sea {

struct EvalSpec {
  // Demo-size axis in seconds of adaptation audio.
  std::vector<double> demo_seconds = {2.0, 10.0, 60.0};
  double temperature = 1.0;  // sampling temperature for generated probes
  int64_t synth_samples = 0;  // cap per generated probe; 0 = full length
};

// One JSON-serializable bundle driving the whole pipeline.  A single master
// seed feeds every randomized stage through stage_seed(), so runs are
// reproducible end to end from (config, seed) alone.
struct ExperimentConfig {
  uint64_t seed = 1;
  std::string out_dir = "out";
  CorpusConfig corpus;
  WaveNetConfig model;
  TrainSpec train;
  VerifierConfig verifier;
  VerifierTrainSpec verifier_train;
  EncoderConfig encoder;
  EncoderTrainSpec encoder_train;
  AdaptSpec adapt;
  EvalSpec eval;

  uint64_t stage_seed(const std::string& stage) const;
  void validate() const;  // cross-module consistency
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
// Missing keys fall back to defaults, so sparse config files stay valid.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
std::string config_hash(const ExperimentConfig& cfg);  // crc32 of canonical dump

struct OutPaths {
  std::string root;
  std::string corpus_dir() const;
  std::string model_ckpt() const;
  std::string train_trace() const;
  std::string verifier_ckpt() const;
  std::string encoder_ckpt() const;
  std::string encoder_trace() const;
  std::string voices_dir() const;
  std::string voice_path(const std::string& method, int speaker_id,
                         double seconds) const;
  std::string synth_dir() const;
  std::string eval_dir() const;
  std::string manifest_path() const;
};
OutPaths out_paths(const ExperimentConfig& cfg);

void cmd_gen_corpus(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_train_encoder(const ExperimentConfig& cfg);

// method "" = all three; speaker_id -1 = every held-out speaker;
// demo_seconds <= 0 = every size in cfg.eval.demo_seconds.
void cmd_adapt(const ExperimentConfig& cfg, const std::string& method,
               int speaker_id, double demo_seconds);

struct SynthRequest {
  std::string voice_path;
  std::string utterance_id;  // conditioning source from the corpus
  int64_t samples = 0;       // 0 = full conditioning length
  double temperature = 1.0;
  uint64_t seed = 1;
  std::string out_wav;  // "" derives a name under synth/
};
// Returns the written WAV path.
std::string cmd_synth(const ExperimentConfig& cfg, const SynthRequest& req);

struct EvalOutcome {
  double real_eer = 0.0;
  // method -> demo size in ms -> EER; missing cells absent from the map.
  std::map<std::string, std::map<int64_t, double>> eer;
  std::map<std::string, double> auc;  // real-vs-generated, pooled over sizes
  std::vector<std::string> gaps;      // human-readable missing-cell reports
  double verifier_accuracy = 0.0;
  double verifier_margin = 0.0;
};
EvalOutcome cmd_eval(const ExperimentConfig& cfg);

struct GradCheckOutcome {
  double max_rel_error = 0.0;
  std::vector<std::pair<std::string, double>> per_op;  // name, max rel err
};
GradCheckOutcome run_grad_check_suite(uint64_t seed);

}  // namespace sea
