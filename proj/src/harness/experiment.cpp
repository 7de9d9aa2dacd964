#include "harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>

#include "audio/wavio.hpp"
#include "common/checksum.hpp"
#include "common/error.hpp"
#include "common/fsutil.hpp"
#include "common/rng.hpp"
#include "corpus/corpus_io.hpp"
#include "diff/gradcheck.hpp"
#include "eval/metrics.hpp"
#include "model/checkpoint.hpp"
#include "model/sampler.hpp"

namespace sea {

using nlohmann::json;

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json train_spec_to_json(const TrainSpec& s) {
  return json{{"steps", s.steps},
              {"lr", s.lr},
              {"crop_frames", s.crop_frames},
              {"context_frames", s.context_frames},
              {"log_interval", s.log_interval}};
}

TrainSpec train_spec_from_json(const json& j) {
  TrainSpec s;
  s.steps = j.value("steps", s.steps);
  s.lr = j.value("lr", s.lr);
  s.crop_frames = j.value("crop_frames", s.crop_frames);
  s.context_frames = j.value("context_frames", s.context_frames);
  s.log_interval = j.value("log_interval", s.log_interval);
  return s;
}

json verifier_train_to_json(const VerifierTrainSpec& s) {
  return json{{"steps", s.steps},
              {"lr", s.lr},
              {"batch", s.batch},
              {"log_interval", s.log_interval},
              {"holdout_every", s.holdout_every}};
}

VerifierTrainSpec verifier_train_from_json(const json& j) {
  VerifierTrainSpec s;
  s.steps = j.value("steps", s.steps);
  s.lr = j.value("lr", s.lr);
  s.batch = j.value("batch", s.batch);
  s.log_interval = j.value("log_interval", s.log_interval);
  s.holdout_every = j.value("holdout_every", s.holdout_every);
  return s;
}

json encoder_train_to_json(const EncoderTrainSpec& s) {
  return json{{"steps", s.steps},
              {"lr", s.lr},
              {"crop_frames", s.crop_frames},
              {"context_frames", s.context_frames},
              {"log_interval", s.log_interval}};
}

EncoderTrainSpec encoder_train_from_json(const json& j) {
  EncoderTrainSpec s;
  s.steps = j.value("steps", s.steps);
  s.lr = j.value("lr", s.lr);
  s.crop_frames = j.value("crop_frames", s.crop_frames);
  s.context_frames = j.value("context_frames", s.context_frames);
  s.log_interval = j.value("log_interval", s.log_interval);
  return s;
}

json adapt_spec_to_json(const AdaptSpec& s) {
  return json{{"emb_steps", s.emb_steps},
              {"emb_lr", s.emb_lr},
              {"emb_eval_interval", s.emb_eval_interval},
              {"emb_plateau_patience", s.emb_plateau_patience},
              {"emb_plateau_tol", s.emb_plateau_tol},
              {"emb_plateau_max_utts", s.emb_plateau_max_utts},
              {"all_steps", s.all_steps},
              {"all_lr", s.all_lr},
              {"patience", s.patience},
              {"eval_interval", s.eval_interval},
              {"crop_frames", s.crop_frames},
              {"context_frames", s.context_frames}};
}

AdaptSpec adapt_spec_from_json(const json& j) {
  AdaptSpec s;
  s.emb_steps = j.value("emb_steps", s.emb_steps);
  s.emb_lr = j.value("emb_lr", s.emb_lr);
  s.emb_eval_interval = j.value("emb_eval_interval", s.emb_eval_interval);
  s.emb_plateau_patience = j.value("emb_plateau_patience", s.emb_plateau_patience);
  s.emb_plateau_tol = j.value("emb_plateau_tol", s.emb_plateau_tol);
  s.emb_plateau_max_utts = j.value("emb_plateau_max_utts", s.emb_plateau_max_utts);
  s.all_steps = j.value("all_steps", s.all_steps);
  s.all_lr = j.value("all_lr", s.all_lr);
  s.patience = j.value("patience", s.patience);
  s.eval_interval = j.value("eval_interval", s.eval_interval);
  s.crop_frames = j.value("crop_frames", s.crop_frames);
  s.context_frames = j.value("context_frames", s.context_frames);
  return s;
}

json eval_spec_to_json(const EvalSpec& s) {
  return json{{"demo_seconds", s.demo_seconds},
              {"temperature", s.temperature},
              {"synth_samples", s.synth_samples}};
}

EvalSpec eval_spec_from_json(const json& j) {
  EvalSpec s;
  s.demo_seconds = j.value("demo_seconds", s.demo_seconds);
  s.temperature = j.value("temperature", s.temperature);
  s.synth_samples = j.value("synth_samples", s.synth_samples);
  return s;
}

int64_t size_ms(double seconds) {
  return int64_t(std::llround(seconds * 1000.0));
}

const std::vector<std::string> kMethods = {"emb", "all", "enc"};

}  // namespace

uint64_t ExperimentConfig::stage_seed(const std::string& stage) const {
  return hash_seed(seed, fnv1a(stage));
}

void ExperimentConfig::validate() const {
  model.validate();
  verifier.validate();
  encoder.validate();
  check_arg(model.frame_stride == corpus.frame_stride,
            "config: model frame stride != corpus frame stride");
  check_arg(model.num_speakers == corpus.train_speakers,
            "config: model embedding table size != training speaker count");
  check_arg(verifier.num_speakers == corpus.train_speakers,
            "config: verifier class count != training speaker count");
  check_arg(encoder.embedding_dim == model.embedding_dim,
            "config: encoder output dim != model embedding dim");
  check_arg(encoder.dvector_dim == verifier.dvector_dim,
            "config: encoder d-vector dim != verifier d-vector dim");
  int64_t utt_samples =
      int64_t(corpus.frames_per_utterance) * corpus.frame_stride;
  check_arg(utt_samples >= encoder.min_input_samples(),
            "config: utterances too short for the encoder conv stack");
  check_arg(utt_samples >= verifier.spectral.window,
            "config: utterances shorter than the verifier analysis window");
  check_arg(!eval.demo_seconds.empty(), "config: no demo sizes");
  for (double s : eval.demo_seconds)
    check_arg(s > 0.0, "config: demo sizes must be positive");
  check_arg(eval.temperature >= 0.0, "config: negative sampling temperature");
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  return json{{"seed", cfg.seed},
              {"out_dir", cfg.out_dir},
              {"corpus", corpus_config_to_json(cfg.corpus)},
              {"model", wavenet_config_to_json(cfg.model)},
              {"train", train_spec_to_json(cfg.train)},
              {"verifier", verifier_config_to_json(cfg.verifier)},
              {"verifier_train", verifier_train_to_json(cfg.verifier_train)},
              {"encoder", encoder_config_to_json(cfg.encoder)},
              {"encoder_train", encoder_train_to_json(cfg.encoder_train)},
              {"adapt", adapt_spec_to_json(cfg.adapt)},
              {"eval", eval_spec_to_json(cfg.eval)}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("corpus")) cfg.corpus = corpus_config_from_json(j.at("corpus"));
  if (j.contains("model")) cfg.model = wavenet_config_from_json(j.at("model"));
  if (j.contains("train")) cfg.train = train_spec_from_json(j.at("train"));
  if (j.contains("verifier"))
    cfg.verifier = verifier_config_from_json(j.at("verifier"));
  if (j.contains("verifier_train"))
    cfg.verifier_train = verifier_train_from_json(j.at("verifier_train"));
  if (j.contains("encoder"))
    cfg.encoder = encoder_config_from_json(j.at("encoder"));
  if (j.contains("encoder_train"))
    cfg.encoder_train = encoder_train_from_json(j.at("encoder_train"));
  if (j.contains("adapt")) cfg.adapt = adapt_spec_from_json(j.at("adapt"));
  if (j.contains("eval")) cfg.eval = eval_spec_from_json(j.at("eval"));
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig{};
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError("cannot parse config " + path + ": " + e.what());
  }
  try {
    return experiment_config_from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError("bad config " + path + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = experiment_config_to_json(cfg).dump();
  return crc32_hex(
      crc32(reinterpret_cast<const uint8_t*>(dump.data()), dump.size()));
}

std::string OutPaths::corpus_dir() const { return path_join(root, "corpus"); }
std::string OutPaths::model_ckpt() const { return path_join(root, "model.seaw"); }
std::string OutPaths::train_trace() const {
  return path_join(root, "train_trace.csv");
}
std::string OutPaths::verifier_ckpt() const {
  return path_join(root, "verifier.seaw");
}
std::string OutPaths::encoder_ckpt() const {
  return path_join(root, "encoder.seaw");
}
std::string OutPaths::encoder_trace() const {
  return path_join(root, "encoder_trace.csv");
}
std::string OutPaths::voices_dir() const { return path_join(root, "voices"); }
std::string OutPaths::voice_path(const std::string& method, int speaker_id,
                                 double seconds) const {
  return path_join(voices_dir(), "voice_" + method + "_s" +
                                     std::to_string(speaker_id) + "_" +
                                     std::to_string(size_ms(seconds)) +
                                     "ms.seaw");
}
std::string OutPaths::synth_dir() const { return path_join(root, "synth"); }
std::string OutPaths::eval_dir() const { return path_join(root, "eval"); }
std::string OutPaths::manifest_path() const {
  return path_join(root, "run_manifest.json");
}

OutPaths out_paths(const ExperimentConfig& cfg) { return OutPaths{cfg.out_dir}; }

namespace {

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Loads run_manifest.json (if present), verifies the config hash, merges
// the stage entry, records artifact checksums, writes it back.
void record_stage(const ExperimentConfig& cfg, const std::string& stage,
                  uint64_t stage_seed, double seconds,
                  const std::vector<std::string>& artifacts,
                  const json& extra = json::object()) {
  OutPaths paths = out_paths(cfg);
  json manifest;
  if (path_exists(paths.manifest_path())) {
    try {
      manifest = json::parse(read_text_file(paths.manifest_path()));
    } catch (const json::exception& e) {
      throw IoError("cannot parse " + paths.manifest_path() + ": " + e.what());
    }
  }
  const std::string hash = config_hash(cfg);
  if (manifest.contains("config_hash")) {
    check_arg(manifest.at("config_hash") == hash,
              "output dir " + cfg.out_dir +
                  " holds artifacts from a different config (hash mismatch)");
  }
  manifest["config_hash"] = hash;
  manifest["versions"] = json{{"app", "0.1.0"},
                              {"checkpoint_format", 1},
                              {"sidecar_format", 1},
                              {"dvector_format", 1}};
  json stage_entry;
  stage_entry["seed"] = stage_seed;
  stage_entry["seconds"] = seconds;
  json arts = json::object();
  for (const std::string& rel : artifacts) {
    const std::string full = path_join(cfg.out_dir, rel);
    check_io(path_exists(full), "manifest artifact missing: " + full);
    arts[rel] = json{{"crc32", crc32_hex(crc32_file(full))}};
  }
  stage_entry["artifacts"] = arts;
  for (auto it = extra.begin(); it != extra.end(); ++it)
    stage_entry[it.key()] = it.value();
  manifest["stages"][stage] = stage_entry;
  write_text_file(paths.manifest_path(), manifest.dump(2) + "\n");
}

Corpus load_corpus_checked(const ExperimentConfig& cfg) {
  OutPaths paths = out_paths(cfg);
  check_arg(path_exists(path_join(paths.corpus_dir(), "manifest.json")),
            "no corpus in " + paths.corpus_dir() + "; run gen-corpus first");
  Corpus corpus = load_corpus(paths.corpus_dir());
  check_arg(corpus.seed == cfg.stage_seed("corpus"),
            "corpus on disk was generated with a different seed");
  check_arg(corpus_config_to_json(corpus.config) ==
                corpus_config_to_json(cfg.corpus),
            "corpus on disk was generated with a different config");
  return corpus;
}

Checkpoint load_model_ckpt_checked(const ExperimentConfig& cfg) {
  OutPaths paths = out_paths(cfg);
  check_arg(path_exists(paths.model_ckpt()),
            "no model checkpoint at " + paths.model_ckpt() + "; run train first");
  Checkpoint ckpt = load_checkpoint(paths.model_ckpt());
  check_io(ckpt.meta.value("kind", "") == "wavenet",
           paths.model_ckpt() + " is not a model checkpoint");
  WaveNetConfig mc = wavenet_config_from_json(ckpt.meta.at("model_config"));
  check_arg(wavenet_config_to_json(mc) == wavenet_config_to_json(cfg.model),
            "model checkpoint was trained with a different model config");
  return ckpt;
}

WaveNet load_model_checked(const ExperimentConfig& cfg) {
  Checkpoint ckpt = load_model_ckpt_checked(cfg);
  return WaveNet(cfg.model, extract_prefixed(ckpt, ""));
}

Verifier ensure_verifier(const ExperimentConfig& cfg, const Corpus& corpus) {
  OutPaths paths = out_paths(cfg);
  if (path_exists(paths.verifier_ckpt())) {
    Checkpoint ckpt = load_checkpoint(paths.verifier_ckpt());
    check_io(ckpt.meta.value("kind", "") == "verifier",
             paths.verifier_ckpt() + " is not a verifier checkpoint");
    VerifierConfig vc = verifier_config_from_json(ckpt.meta.at("verifier_config"));
    check_arg(verifier_config_to_json(vc) ==
                  verifier_config_to_json(cfg.verifier),
              "verifier checkpoint has a different config");
    return Verifier(vc, extract_prefixed(ckpt, ""));
  }
  StageTimer timer;
  const uint64_t seed = cfg.stage_seed("verifier");
  Verifier v(cfg.verifier, seed);
  VerifierReport report = train_verifier(v, corpus, cfg.verifier_train, seed);
  std::printf("verifier: holdout accuracy %.3f, cosine margin %.3f\n",
              report.quality.accuracy, report.quality.margin());
  if (report.quality.accuracy < 0.9 || report.quality.margin() < 0.2) {
    std::printf("verifier: WARNING, below the accuracy/margin targets; "
                "EER estimates may be unreliable\n");
  }
  json meta{{"kind", "verifier"},
            {"verifier_config", verifier_config_to_json(cfg.verifier)},
            {"accuracy", report.quality.accuracy},
            {"same_cosine_mean", report.quality.same_cosine_mean},
            {"cross_cosine_mean", report.quality.cross_cosine_mean}};
  save_checkpoint(paths.verifier_ckpt(), meta, {{"", &v.params()}});
  record_stage(cfg, "verifier", seed, timer.seconds(), {"verifier.seaw"},
               json{{"accuracy", report.quality.accuracy},
                    {"margin", report.quality.margin()}});
  return v;
}

void write_trace_csv(const std::string& path, const TrainTrace& trace,
                     int start_step, bool fresh) {
  FILE* f = std::fopen(path.c_str(), fresh ? "w" : "a");
  check_io(f != nullptr, "cannot open " + path);
  if (fresh) std::fprintf(f, "step,nll\n");
  for (size_t i = 0; i < trace.nll.size(); ++i) {
    std::fprintf(f, "%d,%.17g\n", start_step + int(i) + 1, trace.nll[i]);
  }
  std::fclose(f);
}

struct DemoSelection {
  std::vector<std::string> demo_ids;
  std::vector<std::string> holdout_ids;
};

DemoSelection select_demos(const Corpus& corpus, int speaker_id,
                           double seconds) {
  auto it = corpus.splits.find(speaker_id);
  check_arg(it != corpus.splits.end(),
            "speaker " + std::to_string(speaker_id) + " has no adaptation split");
  const CorpusSplit& split = it->second;
  DemoSelection sel;
  sel.holdout_ids = split.holdout;
  const double utt_seconds =
      double(corpus.config.frames_per_utterance) * corpus.config.frame_stride /
      double(corpus.config.sample_rate);
  double acc = 0.0;
  for (size_t i = split.holdout.size(); i < split.adaptation.size(); ++i) {
    if (acc >= seconds) break;
    sel.demo_ids.push_back(split.adaptation[i]);
    acc += utt_seconds;
  }
  check_arg(acc >= seconds,
            "insufficient demo audio for speaker " + std::to_string(speaker_id) +
                ": requested " + std::to_string(seconds) + " s, pool has " +
                std::to_string(acc) + " s");
  return sel;
}

// Truncates conditioning and waveform to at most `samples` (0 = no cap).
Waveform synth_with_voice(const WaveNet& model, const AdaptedVoice& voice,
                          const Utterance& cond_source, int64_t samples,
                          double temperature, uint64_t seed,
                          std::vector<int>* classes_out = nullptr) {
  LocalConditioning lc = make_local_conditioning(cond_source, voice.stats);
  const int stride = lc.frame_stride;
  if (samples > 0) {
    int64_t want_frames = (samples + stride - 1) / stride;
    if (want_frames < lc.frames()) {
      lc.features = slice_cols(lc.features, 0, want_frames);
    }
  }
  Sampler sampler(model);
  Waveform w = sampler.sample(lc, voice.embedding, temperature, seed,
                              cond_source.waveform.sample_rate, classes_out);
  if (samples > 0 && int64_t(w.samples.size()) > samples) {
    w.samples.resize(size_t(samples));
    if (classes_out && int64_t(classes_out->size()) > samples)
      classes_out->resize(size_t(samples));
  }
  return w;
}

}  // namespace

void cmd_gen_corpus(const ExperimentConfig& cfg) {
  cfg.validate();
  OutPaths paths = out_paths(cfg);
  StageTimer timer;
  const uint64_t seed = cfg.stage_seed("corpus");
  Corpus corpus = build_corpus(cfg.corpus, seed);
  save_corpus(corpus, paths.corpus_dir());
  std::printf("gen-corpus: %zu utterances for %zu speakers -> %s\n",
              corpus.utterances.size(), corpus.speakers.size(),
              paths.corpus_dir().c_str());
  record_stage(cfg, "gen-corpus", seed, timer.seconds(),
               {"corpus/manifest.json"},
               json{{"utterances", corpus.utterances.size()},
                    {"speakers", corpus.speakers.size()}});
}

void cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  OutPaths paths = out_paths(cfg);
  Corpus corpus = load_corpus_checked(cfg);
  StageTimer timer;
  const uint64_t seed = cfg.stage_seed("train");

  std::optional<WaveNet> model;
  int start_step = 0;
  std::optional<Checkpoint> ckpt;
  if (path_exists(paths.model_ckpt())) {
    ckpt.emplace(load_model_ckpt_checked(cfg));
    model.emplace(cfg.model, extract_prefixed(*ckpt, ""));
    start_step = int(ckpt->meta.value("step", int64_t{0}));
  } else {
    model.emplace(cfg.model, cfg.stage_seed("model-init"));
  }
  AdamConfig ac;
  ac.lr = cfg.train.lr;
  Adam opt(model->params(), ac);
  if (ckpt && ckpt->has_opt) {
    restore_adam(opt, *ckpt, "");
  } else {
    opt.set_step_count(start_step);
  }

  if (start_step >= cfg.train.steps) {
    std::printf("train: checkpoint already at step %d (budget %d), nothing to do\n",
                start_step, cfg.train.steps);
    return;
  }

  TrainSpec spec = cfg.train;
  spec.steps = cfg.train.steps - start_step;
  TrainTrace trace =
      train_multispeaker(*model, opt, corpus, spec, seed, start_step);
  write_trace_csv(paths.train_trace(), trace, start_step, start_step == 0);

  json meta{{"kind", "wavenet"},
            {"model_config", wavenet_config_to_json(cfg.model)},
            {"step", cfg.train.steps}};
  save_checkpoint(paths.model_ckpt(), meta, {{"", &model->params()}}, &opt);
  std::printf("train: %d steps, final nll %.4f -> %s\n", cfg.train.steps,
              trace.nll.empty() ? 0.0 : trace.nll.back(),
              paths.model_ckpt().c_str());
  record_stage(cfg, "train", seed, timer.seconds(),
               {"model.seaw", "train_trace.csv"},
               json{{"steps", cfg.train.steps},
                    {"final_nll", trace.nll.empty() ? 0.0 : trace.nll.back()}});
}

void cmd_train_encoder(const ExperimentConfig& cfg) {
  cfg.validate();
  OutPaths paths = out_paths(cfg);
  Corpus corpus = load_corpus_checked(cfg);
  Verifier verifier = ensure_verifier(cfg, corpus);
  StageTimer timer;
  const uint64_t seed = cfg.stage_seed("encoder");

  if (path_exists(paths.encoder_ckpt())) {
    std::printf("train-encoder: %s already exists, nothing to do\n",
                paths.encoder_ckpt().c_str());
    return;
  }
  EncoderTrainResult result =
      train_encoder(corpus, cfg.model, cfg.encoder, cfg.encoder_train, verifier,
                    seed);
  save_encoder_checkpoint(paths.encoder_ckpt(), result.model, result.encoder);
  write_trace_csv(paths.encoder_trace(), result.trace, 0, true);
  std::printf("train-encoder: %d steps, final nll %.4f -> %s\n",
              cfg.encoder_train.steps,
              result.trace.nll.empty() ? 0.0 : result.trace.nll.back(),
              paths.encoder_ckpt().c_str());
  record_stage(
      cfg, "train-encoder", seed, timer.seconds(),
      {"encoder.seaw", "encoder_trace.csv"},
      json{{"steps", cfg.encoder_train.steps},
           {"final_nll",
            result.trace.nll.empty() ? 0.0 : result.trace.nll.back()}});
}

void cmd_adapt(const ExperimentConfig& cfg, const std::string& method,
               int speaker_id, double demo_seconds) {
  cfg.validate();
  check_arg(method.empty() || method == "emb" || method == "all" ||
                method == "enc",
            "unknown adaptation method: " + method);
  OutPaths paths = out_paths(cfg);
  Corpus corpus = load_corpus_checked(cfg);
  WaveNet base = load_model_checked(cfg);
  StageTimer timer;
  const uint64_t adapt_seed = cfg.stage_seed("adapt");

  std::vector<std::string> methods =
      method.empty() ? kMethods : std::vector<std::string>{method};
  std::vector<int> speakers;
  if (speaker_id >= 0) {
    check_arg(corpus.splits.count(speaker_id) > 0,
              "speaker " + std::to_string(speaker_id) +
                  " is not a held-out speaker");
    speakers.push_back(speaker_id);
  } else {
    speakers = corpus.heldout_speaker_ids;
  }
  std::vector<double> sizes = demo_seconds > 0.0
                                  ? std::vector<double>{demo_seconds}
                                  : cfg.eval.demo_seconds;

  // The encoder bundle is loaded lazily; only method=enc needs it.
  std::optional<EncoderTrainResult> enc_bundle;
  std::optional<Verifier> verifier;

  make_dirs(paths.voices_dir());
  std::vector<std::string> artifacts;
  for (const std::string& m : methods) {
    for (double sec : sizes) {
      for (int sid : speakers) {
        const std::string vpath = paths.voice_path(m, sid, sec);
        const std::string rel =
            "voices/" + vpath.substr(paths.voices_dir().size() + 1);
        if (path_exists(vpath)) {
          std::printf("adapt: %s exists, skipping\n", vpath.c_str());
          artifacts.push_back(rel);
          continue;
        }
        DemoSelection sel = select_demos(corpus, sid, sec);
        DemoSet demos = make_demo_set(corpus, sid, sel.demo_ids, sel.holdout_ids);
        const uint64_t cell_seed =
            hash_seed(adapt_seed, fnv1a(m), uint64_t(size_ms(sec)),
                      uint64_t(sid));
        AdaptedVoice voice;
        if (m == "emb") {
          voice = sea_emb(base, demos, cfg.adapt, cell_seed);
        } else if (m == "all") {
          // The chain starts from the emb cell's exact result: reuse its
          // file when present, otherwise recompute it (pure in its seed).
          const std::string emb_path = paths.voice_path("emb", sid, sec);
          const uint64_t emb_seed =
              hash_seed(adapt_seed, fnv1a("emb"), uint64_t(size_ms(sec)),
                        uint64_t(sid));
          AdaptedVoice emb_init =
              path_exists(emb_path) ? load_voice(emb_path)
                                    : sea_emb(base, demos, cfg.adapt, emb_seed);
          voice = sea_all(base, demos, cfg.adapt, cell_seed, emb_init);
        } else {
          if (!enc_bundle) {
            check_arg(path_exists(paths.encoder_ckpt()),
                      "method enc needs " + paths.encoder_ckpt() +
                          "; run train-encoder first");
            enc_bundle.emplace(load_encoder_checkpoint(paths.encoder_ckpt()));
            verifier.emplace(ensure_verifier(cfg, corpus));
          }
          voice = sea_enc_predict(enc_bundle->encoder, *verifier,
                                  enc_bundle->model, demos);
        }
        save_voice(vpath, voice);
        artifacts.push_back(rel);
        std::printf("adapt: %s speaker %d %.3gs -> %s (steps %d, demo nll %.4f)\n",
                    m.c_str(), sid, sec, vpath.c_str(),
                    voice.provenance.value("steps_run", 0),
                    voice.provenance.value("final_demo_nll", 0.0));
      }
    }
  }
  record_stage(cfg, "adapt", adapt_seed, timer.seconds(), artifacts,
               json{{"cells", artifacts.size()}});
}

std::string cmd_synth(const ExperimentConfig& cfg, const SynthRequest& req) {
  cfg.validate();
  check_arg(!req.voice_path.empty(), "synth: missing voice path");
  check_arg(!req.utterance_id.empty(), "synth: missing conditioning utterance id");
  OutPaths paths = out_paths(cfg);
  Corpus corpus = load_corpus_checked(cfg);
  StageTimer timer;

  AdaptedVoice voice = load_voice(req.voice_path);
  const Utterance& cond = corpus.by_id(req.utterance_id);

  std::optional<WaveNet> model;
  if (voice.has_finetuned) {
    model.emplace(voice.model_config, voice.finetuned.clone());
  } else if (voice.method == "enc") {
    check_arg(path_exists(paths.encoder_ckpt()),
              "voice was encoder-predicted; " + paths.encoder_ckpt() +
                  " is required");
    model.emplace(load_encoder_checkpoint(paths.encoder_ckpt()).model);
  } else {
    model.emplace(load_model_checked(cfg));
  }

  Waveform w = synth_with_voice(*model, voice, cond, req.samples,
                                req.temperature, req.seed);
  std::string out = req.out_wav;
  if (out.empty()) {
    make_dirs(paths.synth_dir());
    std::string stem = req.voice_path;
    size_t slash = stem.find_last_of('/');
    if (slash != std::string::npos) stem = stem.substr(slash + 1);
    size_t dot = stem.rfind(".seaw");
    if (dot != std::string::npos) stem = stem.substr(0, dot);
    out = path_join(paths.synth_dir(), stem + "_" + req.utterance_id + ".wav");
  }
  write_wav(out, w);
  std::printf("synth: %zu samples at %d Hz -> %s\n", w.samples.size(),
              w.sample_rate, out.c_str());

  // Only artifacts inside the experiment dir are tracked in the manifest.
  if (out.rfind(cfg.out_dir + "/", 0) == 0) {
    record_stage(cfg, "synth", req.seed, timer.seconds(),
                 {out.substr(cfg.out_dir.size() + 1)},
                 json{{"samples", w.samples.size()}});
  }
  return out;
}

EvalOutcome cmd_eval(const ExperimentConfig& cfg) {
  cfg.validate();
  OutPaths paths = out_paths(cfg);
  Corpus corpus = load_corpus_checked(cfg);
  WaveNet base = load_model_checked(cfg);
  Verifier verifier = ensure_verifier(cfg, corpus);
  StageTimer timer;
  const uint64_t eval_seed = cfg.stage_seed("eval");
  make_dirs(path_join(paths.eval_dir(), "gen"));

  EvalOutcome outcome;
  VerifierQuality q =
      verifier_quality(verifier, corpus, cfg.verifier_train.holdout_every);
  outcome.verifier_accuracy = q.accuracy;
  outcome.verifier_margin = q.margin();

  std::optional<EncoderTrainResult> enc_bundle;
  if (path_exists(paths.encoder_ckpt())) {
    enc_bundle.emplace(load_encoder_checkpoint(paths.encoder_ckpt()));
  }

  // Enrollment: real adaptation-pool audio of each held-out speaker.
  std::vector<Centroid> centroids;
  for (int sid : corpus.heldout_speaker_ids) {
    const CorpusSplit& split = corpus.splits.at(sid);
    std::vector<DVector> enrollment;
    for (const std::string& id : split.adaptation) {
      DVector d;
      d.utterance_id = id;
      d.speaker_id = sid;
      d.values = verifier.dvector(corpus.by_id(id).waveform);
      enrollment.push_back(std::move(d));
    }
    centroids.push_back(enroll(sid, enrollment));
  }

  // Real probes: held-out speakers' test utterances.
  std::vector<DVector> real_probes;
  for (int sid : corpus.heldout_speaker_ids) {
    for (const std::string& id : corpus.splits.at(sid).test) {
      DVector d;
      d.utterance_id = id;
      d.speaker_id = sid;
      d.values = verifier.dvector(corpus.by_id(id).waveform);
      real_probes.push_back(std::move(d));
    }
  }
  std::vector<Trial> real_trials =
      build_trials(centroids, real_probes, TrialPolicy::kExhaustive, eval_seed);
  EerResult real_eer = compute_eer(real_trials);
  outcome.real_eer = real_eer.eer;
  {
    std::vector<double> gen, imp;
    for (const auto& t : real_trials) (t.genuine ? gen : imp).push_back(t.score);
    write_det_csv(path_join(paths.eval_dir(), "det_real.csv"),
                  det_curve(gen, imp));
    write_trials_csv(path_join(paths.eval_dir(), "trials_real.csv"), real_trials);
  }
  // Genuine real scores double as the ROC positives.
  std::vector<double> roc_positives;
  for (const auto& t : real_trials)
    if (t.genuine) roc_positives.push_back(t.score);

  std::vector<DVector> all_dvecs = real_probes;
  std::vector<uint8_t> all_tags(real_probes.size(), 0);

  // method -> generated-vs-own-target scores pooled over sizes (ROC negatives).
  std::map<std::string, std::vector<double>> roc_negatives;

  for (const std::string& m : kMethods) {
    for (double sec : cfg.eval.demo_seconds) {
      const int64_t ms = size_ms(sec);
      std::vector<DVector> gen_probes;
      bool cell_complete = true;
      for (int sid : corpus.heldout_speaker_ids) {
        const std::string vpath = paths.voice_path(m, sid, sec);
        if (!path_exists(vpath)) {
          outcome.gaps.push_back("missing voice " + vpath + " (run adapt)");
          cell_complete = false;
          continue;
        }
        AdaptedVoice voice = load_voice(vpath);
        std::optional<WaveNet> ft_model;
        const WaveNet* model = &base;
        if (voice.has_finetuned) {
          ft_model.emplace(voice.model_config, voice.finetuned.clone());
          model = &*ft_model;
        } else if (voice.method == "enc") {
          if (!enc_bundle) {
            outcome.gaps.push_back("missing " + paths.encoder_ckpt() +
                                   " for enc voices (run train-encoder)");
            cell_complete = false;
            continue;
          }
          model = &enc_bundle->model;
        }
        for (const std::string& id : corpus.splits.at(sid).test) {
          const Utterance& cond = corpus.by_id(id);
          const uint64_t synth_seed =
              hash_seed(eval_seed, fnv1a(m), uint64_t(ms), fnv1a(id));
          Waveform w =
              synth_with_voice(*model, voice, cond, cfg.eval.synth_samples,
                               cfg.eval.temperature, synth_seed);
          const std::string wav_rel = "eval/gen/" + m + "_" +
                                      std::to_string(ms) + "ms_" + id + ".wav";
          write_wav(path_join(cfg.out_dir, wav_rel), w);
          DVector d;
          d.utterance_id = m + "/" + std::to_string(ms) + "ms/" + id;
          d.speaker_id = sid;
          d.values = verifier.dvector(w);
          gen_probes.push_back(std::move(d));
        }
      }
      if (gen_probes.empty()) continue;
      std::vector<Trial> trials = build_trials(centroids, gen_probes,
                                               TrialPolicy::kExhaustive,
                                               eval_seed);
      EerResult cell = compute_eer(trials);
      outcome.eer[m][ms] = cell.eer;
      std::vector<double> gen, imp;
      for (const auto& t : trials) {
        (t.genuine ? gen : imp).push_back(t.score);
        if (t.genuine) roc_negatives[m].push_back(t.score);
      }
      const std::string tag = m + "_" + std::to_string(ms) + "ms";
      write_det_csv(path_join(paths.eval_dir(), "det_" + tag + ".csv"),
                    det_curve(gen, imp));
      write_trials_csv(path_join(paths.eval_dir(), "trials_" + tag + ".csv"),
                       trials);
      for (auto& d : gen_probes) {
        all_dvecs.push_back(std::move(d));
        all_tags.push_back(1);
      }
      if (!cell_complete) {
        outcome.gaps.push_back("cell " + tag +
                               " computed from a partial speaker set");
      }
    }
  }

  // Adversarial ROC per method: real genuine scores vs generated-vs-target
  // scores, pooled over demo sizes.
  for (const auto& [m, negs] : roc_negatives) {
    if (negs.empty()) continue;
    RocResult roc = roc_from_scores(roc_positives, negs);
    outcome.auc[m] = roc.auc;
    write_roc_csv(path_join(paths.eval_dir(), "roc_" + m + ".csv"), roc.points);
  }

  write_dvectors(path_join(paths.eval_dir(), "dvectors.seav"), all_dvecs,
                 all_tags);

  // Table-3-shaped summary: one real row plus method x size cells.
  {
    FILE* f = std::fopen(path_join(paths.eval_dir(), "eer_table.csv").c_str(),
                         "w");
    check_io(f != nullptr, "cannot open eer_table.csv");
    std::fprintf(f, "row,demo_seconds,eer\n");
    std::fprintf(f, "real,,%.17g\n", outcome.real_eer);
    const std::map<std::string, std::string> row_names{
        {"all", "sea_all"}, {"emb", "sea_emb"}, {"enc", "sea_enc"}};
    for (const std::string& m : {"all", "emb", "enc"}) {
      for (double sec : cfg.eval.demo_seconds) {
        const int64_t ms = size_ms(sec);
        auto mit = outcome.eer.find(m);
        bool have = mit != outcome.eer.end() && mit->second.count(ms) > 0;
        if (have) {
          std::fprintf(f, "%s,%.17g,%.17g\n", row_names.at(m).c_str(), sec,
                       mit->second.at(ms));
        } else {
          std::fprintf(f, "%s,%.17g,NA\n", row_names.at(m).c_str(), sec);
        }
      }
    }
    std::fclose(f);
  }

  json summary{{"real_eer", outcome.real_eer},
               {"verifier_accuracy", outcome.verifier_accuracy},
               {"verifier_margin", outcome.verifier_margin},
               {"gaps", outcome.gaps}};
  for (const auto& [m, cells] : outcome.eer) {
    for (const auto& [ms, eer] : cells) {
      summary["eer"][m][std::to_string(ms)] = eer;
    }
  }
  for (const auto& [m, auc] : outcome.auc) summary["auc"][m] = auc;
  write_text_file(path_join(paths.eval_dir(), "summary.json"),
                  summary.dump(2) + "\n");

  std::printf("eval: real EER %.4f\n", outcome.real_eer);
  for (const std::string& m : {"all", "emb", "enc"}) {
    auto mit = outcome.eer.find(m);
    if (mit == outcome.eer.end()) continue;
    std::printf("eval: sea_%s", m.c_str());
    for (const auto& [ms, eer] : mit->second) {
      std::printf("  %lldms %.4f", static_cast<long long>(ms), eer);
    }
    if (outcome.auc.count(m)) std::printf("  auc %.4f", outcome.auc.at(m));
    std::printf("\n");
  }
  for (const auto& g : outcome.gaps) std::printf("eval: gap: %s\n", g.c_str());

  std::vector<std::string> artifacts{"eval/eer_table.csv", "eval/summary.json",
                                     "eval/dvectors.seav"};
  record_stage(cfg, "eval", eval_seed, timer.seconds(), artifacts,
               json{{"gaps", outcome.gaps.size()}});
  return outcome;
}

namespace {

// One op's gradient check: builds the loss graph fresh on every call.
double check_op(const std::string& name, ParamSet& params, const LossFn& fn,
                std::vector<std::pair<std::string, double>>* per_op,
                int probes = 20, uint64_t seed = 7) {
  GradCheckOptions opt;
  opt.probes = probes;
  opt.seed = hash_seed(seed, fnv1a(name));
  GradCheckReport rep = grad_check(params, fn, opt);
  per_op->push_back({name, rep.max_rel_error});
  return rep.max_rel_error;
}

Tensor randn(Rng& rng, std::vector<int64_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.v) x = rng.normal() * scale;
  return t;
}

// Keeps values away from the relu kink so finite differences stay clean.
Tensor randn_offset(Rng& rng, std::vector<int64_t> shape) {
  Tensor t(std::move(shape));
  for (auto& x : t.v) {
    double v = rng.normal();
    x = v + (v >= 0.0 ? 0.3 : -0.3);
  }
  return t;
}

}  // namespace

GradCheckOutcome run_grad_check_suite(uint64_t seed) {
  GradCheckOutcome out;
  Rng rng(hash_seed(seed, 0x67636bULL));

  auto sum_loss = [](Tape& tape, Val v) { return tape.sum_all(v); };
  (void)sum_loss;

  {  // add + mul + scale
    ParamSet ps;
    Parameter& a = ps.add("a", randn(rng, {3, 4}));
    Parameter& b = ps.add("b", randn(rng, {3, 4}));
    check_op("add_mul_scale", ps,
             [&](bool with_grad) {
               Tape tape;
               Val va = tape.param(a), vb = tape.param(b);
               Val loss = tape.sum_all(
                   tape.scale(tape.mul(tape.add(va, vb), vb), 1.7));
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // add_cols
    ParamSet ps;
    Parameter& x = ps.add("x", randn(rng, {4, 6}));
    Parameter& b = ps.add("b", randn(rng, {4}));
    check_op("add_cols", ps,
             [&](bool with_grad) {
               Tape tape;
               Val loss = tape.sum_all(
                   tape.mul(tape.add_cols(tape.param(x), tape.param(b)),
                            tape.add_cols(tape.param(x), tape.param(b))));
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // relu
    ParamSet ps;
    Parameter& x = ps.add("x", randn_offset(rng, {3, 5}));
    check_op("relu", ps,
             [&](bool with_grad) {
               Tape tape;
               Val loss = tape.sum_all(tape.relu(tape.param(x)));
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // tanh, sigmoid, gated
    ParamSet ps;
    Parameter& a = ps.add("a", randn(rng, {4, 5}));
    Parameter& b = ps.add("b", randn(rng, {4, 5}));
    check_op("tanh_sigmoid_gated", ps,
             [&](bool with_grad) {
               Tape tape;
               Val va = tape.param(a), vb = tape.param(b);
               Val g = tape.gated(va, vb);
               Val extra = tape.add(tape.tanh_op(va), tape.sigmoid(vb));
               Val loss = tape.sum_all(tape.add(g, extra));
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // matvec + as_column + softmax_xent
    ParamSet ps;
    Parameter& w = ps.add("w", randn(rng, {5, 6}));
    Parameter& x = ps.add("x", randn(rng, {6}));
    check_op("matvec_xent", ps,
             [&](bool with_grad) {
               Tape tape;
               Val logits = tape.matvec(tape.param(w), tape.param(x));
               Val loss = tape.softmax_xent(tape.as_column(logits), {2});
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // causal dilated conv
    ParamSet ps;
    Parameter& x = ps.add("x", randn(rng, {3, 9}));
    Parameter& w = ps.add("w", randn(rng, {4, 3, 2}));
    check_op("conv1d_dilated", ps,
             [&](bool with_grad) {
               Tape tape;
               Val y = tape.conv1d(tape.param(x), tape.param(w), 3);
               Val loss = tape.sum_all(tape.mul(y, y));
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // strided conv
    ParamSet ps;
    Parameter& x = ps.add("x", randn(rng, {3, 12}));
    Parameter& w = ps.add("w", randn(rng, {4, 3, 4}));
    check_op("conv1d_strided", ps,
             [&](bool with_grad) {
               Tape tape;
               Val y = tape.conv1d_strided(tape.param(x), tape.param(w), 3);
               Val loss = tape.sum_all(tape.mul(y, y));
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // transposed conv
    ParamSet ps;
    Parameter& x = ps.add("x", randn(rng, {3, 5}));
    Parameter& w = ps.add("w", randn(rng, {4, 3, 6}));
    check_op("conv1d_transposed", ps,
             [&](bool with_grad) {
               Tape tape;
               Val y = tape.conv1d_transposed(tape.param(x), tape.param(w), 2);
               Val loss = tape.sum_all(tape.mul(y, y));
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // gather_cols + embed_row + mean_cols
    ParamSet ps;
    Parameter& table = ps.add("table", randn(rng, {5, 7}));
    check_op("gather_embed_mean", ps,
             [&](bool with_grad) {
               Tape tape;
               Val t = tape.param(table);
               Val m = tape.mean_cols(tape.gather_cols(t, {0, 3, 3, 6}));
               Val r = tape.embed_row(t, 2);
               Val loss = tape.add(tape.sum_all(tape.mul(m, m)),
                                   tape.sum_all(tape.tanh_op(r)));
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // softmax_xent with warm-up exclusion
    ParamSet ps;
    Parameter& logits = ps.add("logits", randn(rng, {5, 6}));
    check_op("softmax_xent_colstart", ps,
             [&](bool with_grad) {
               Tape tape;
               Val loss =
                   tape.softmax_xent(tape.param(logits), {1, 4, 0, 2}, 2);
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op);
  }
  {  // full WaveNet NLL on a 64-sample utterance
    WaveNetConfig cfg;
    cfg.quantization = 16;
    cfg.residual_channels = 8;
    cfg.skip_channels = 8;
    cfg.dilation_cycle = {1, 2, 4};
    cfg.kernel_width = 2;
    cfg.embedding_dim = 4;
    cfg.frame_stride = 16;
    cfg.num_speakers = 3;
    WaveNet model(cfg, hash_seed(seed, 0x6d6f64ULL));
    // The zero-init output head gives exactly uniform logits; perturb it so
    // every gradient path is exercised.
    Rng mr(hash_seed(seed, 0x706572ULL));
    for (double& v : model.params().get("head2.w").t.v) v = 0.1 * mr.normal();
    for (double& v : model.params().get("head2.b").t.v) v = 0.1 * mr.normal();

    const int frames = 4;
    const int T = frames * cfg.frame_stride;  // 64 samples
    std::vector<int> classes(T);
    for (int t = 0; t < T; ++t)
      classes[t] = int(mr.uniform_int(cfg.quantization));
    Tensor feats = randn(mr, {cfg.cond_channels(), frames}, 0.5);

    check_op("wavenet_nll", model.params(),
             [&](bool with_grad) {
               Tape tape;
               Val e = tape.embed_row(
                   tape.param(model.params().get(WaveNet::kEmbeddingName)), 1);
               Val loss = model.nll(tape, classes, cfg.quantization / 2,
                                    tape.constant(feats), e, 0);
               if (with_grad) tape.backward(loss);
               return loss->val.v[0];
             },
             &out.per_op, 40);
  }

  for (const auto& [name, err] : out.per_op) {
    std::printf("grad-check  %-24s %.3e\n", name.c_str(), err);
    out.max_rel_error = std::max(out.max_rel_error, err);
  }
  std::printf("grad-check  max relative error %.3e\n", out.max_rel_error);
  return out;
}

}  // namespace sea
