#include "adapt/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "diff/adam.hpp"
#include "model/checkpoint.hpp"
#include "model/trainer.hpp"

namespace sea {

DemoSet make_demo_set(const Corpus& corpus, int speaker_id,
                      const std::vector<std::string>& demo_ids,
                      const std::vector<std::string>& holdout_ids) {
  check_arg(!demo_ids.empty(), "demo set needs at least one utterance");
  DemoSet set;
  set.speaker_id = speaker_id;
  std::vector<const Utterance*> all;
  for (const auto& id : demo_ids) {
    const Utterance& u = corpus.by_id(id);
    check_arg(u.speaker_id == speaker_id, "demo utterance from wrong speaker: " + id);
    set.demos.push_back(&u);
    all.push_back(&u);
  }
  for (const auto& id : holdout_ids) {
    const Utterance& u = corpus.by_id(id);
    check_arg(u.speaker_id == speaker_id, "holdout utterance from wrong speaker: " + id);
    set.holdout.push_back(&u);
    all.push_back(&u);
  }
  set.stats = compute_f0_stats(all);
  return set;
}

namespace {

// Cached crop source, one per utterance (same layout as the trainer).
struct Item {
  std::vector<int> classes;
  Tensor feats;
};

std::vector<Item> cache_items(const std::vector<const Utterance*>& utts,
                              const SpeakerF0Stats& stats,
                              const WaveNetConfig& cfg) {
  std::vector<Item> items;
  for (const Utterance* u : utts) {
    check_arg(u->frame_stride == cfg.frame_stride,
              "demo frame stride does not match the model");
    Item it;
    it.classes = mulaw_encode(u->waveform, cfg.quantization - 1,
                              cfg.quantization).classes;
    it.feats = make_local_conditioning(*u, stats).features;
    items.push_back(std::move(it));
  }
  return items;
}

// One teacher-forced gradient step on a random crop; returns the crop NLL.
double crop_step(const WaveNet& model, Parameter& e_param, Adam& opt,
                 const std::vector<Item>& items, const AdaptSpec& spec,
                 Rng& rng, ParamSet* model_set) {
  const WaveNetConfig& cfg = model.config();
  const Item& item = items[rng.uniform_int(static_cast<int64_t>(items.size()))];
  int frames = static_cast<int>(item.feats.shape[1]);
  int crop = std::min(spec.crop_frames, frames);
  int start_f = static_cast<int>(rng.uniform_int(frames - crop + 1));
  int ctx = std::min(spec.context_frames, start_f);
  int f0 = start_f - ctx, f1 = start_f + crop;
  int stride = cfg.frame_stride;

  std::vector<int> classes(item.classes.begin() + f0 * stride,
                           item.classes.begin() + f1 * stride);
  int prev = f0 > 0 ? item.classes[f0 * stride - 1] : cfg.quantization / 2;
  Tensor feats = slice_cols(item.feats, f0, f1);

  Tape tape;
  Val e = tape.param(e_param);
  Val loss = model.nll(tape, classes, prev, tape.constant(std::move(feats)), e,
                       ctx * stride);
  double nll = loss->val.v[0];
  if (!std::isfinite(nll)) throw NumericError("adaptation loss is not finite");
  e_param.t.zero_grad();
  if (model_set) model_set->zero_grads();
  tape.backward(loss);
  opt.step();
  return nll;
}

double mean_nll(const WaveNet& model, const std::vector<const Utterance*>& utts,
                const SpeakerF0Stats& stats, const std::vector<double>& e,
                size_t max_utts = 0) {
  check_arg(!utts.empty(), "NLL evaluation over an empty utterance set");
  size_t n = utts.size();
  if (max_utts > 0) n = std::min(n, max_utts);
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += model.eval_nll(*utts[i], stats, e);
  return acc / double(n);
}

nlohmann::json make_provenance(const std::string& method, int steps_run,
                               double demo_nll, double holdout_nll,
                               const SpeakerF0Stats& stats) {
  nlohmann::json p{
      {"method", method},
      {"steps_run", steps_run},
      {"final_demo_nll", demo_nll},
      {"f0_log_mean", stats.mean},
      {"f0_log_std", stats.std},
  };
  if (std::isfinite(holdout_nll)) {
    p["final_holdout_nll"] = holdout_nll;
  } else {
    p["final_holdout_nll"] = nullptr;
  }
  return p;
}

}  // namespace

AdaptedVoice sea_emb(const WaveNet& model, const DemoSet& demos,
                     const AdaptSpec& spec, uint64_t seed) {
  check_arg(!demos.demos.empty(), "sea_emb: empty demo set");
  check_arg(spec.emb_steps > 0, "sea_emb: bad step budget");
  const WaveNetConfig& cfg = model.config();

  // Model weights stay untouched: flag them non-trainable for the whole fit
  // so the tape records no gradient work for them.
  WaveNet& m = const_cast<WaveNet&>(model);
  FreezeGuard freeze(m.params());

  std::vector<double> e0 = model.embedding_table_mean();
  Rng init_rng(hash_seed(seed, 0x656d62ULL));
  for (double& x : e0) x += 0.01 * init_rng.normal();

  ParamSet voice;
  Parameter& e_param = voice.add("e", Tensor::from({cfg.embedding_dim}, e0));
  AdamConfig ac;
  ac.lr = spec.emb_lr;
  Adam opt(voice, ac);

  std::vector<Item> items = cache_items(demos.demos, demos.stats, cfg);

  double best = mean_nll(m, demos.demos, demos.stats, e_param.t.v,
                         size_t(spec.emb_plateau_max_utts));
  int non_improving = 0;
  int steps_run = 0;
  for (int step = 0; step < spec.emb_steps; ++step) {
    Rng rng(hash_seed(seed, 0x656d627374ULL, static_cast<uint64_t>(step)));
    crop_step(m, e_param, opt, items, spec, rng, nullptr);
    ++steps_run;
    if (spec.emb_eval_interval > 0 && (step + 1) % spec.emb_eval_interval == 0) {
      double nll = mean_nll(m, demos.demos, demos.stats, e_param.t.v,
                            size_t(spec.emb_plateau_max_utts));
      if (nll < best - spec.emb_plateau_tol) {
        best = nll;
        non_improving = 0;
      } else {
        best = std::min(best, nll);
        if (++non_improving >= spec.emb_plateau_patience) break;
      }
    }
  }

  AdaptedVoice out;
  out.method = "emb";
  out.embedding = e_param.t.v;
  out.stats = demos.stats;
  out.model_config = cfg;
  double demo_nll = mean_nll(m, demos.demos, demos.stats, out.embedding);
  double holdout_nll = demos.holdout.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : mean_nll(m, demos.holdout, demos.stats, out.embedding);
  out.provenance = make_provenance("emb", steps_run, demo_nll, holdout_nll,
                                   demos.stats);
  return out;
}

AdaptedVoice sea_all(const WaveNet& model, const DemoSet& demos,
                     const AdaptSpec& spec, uint64_t seed,
                     const AdaptedVoice& emb_init) {
  check_arg(!demos.demos.empty(), "sea_all: empty demo set");
  check_arg(!demos.holdout.empty(), "sea_all: early stopping needs a holdout set");
  check_arg(emb_init.method == "emb", "sea_all: initialize from a sea_emb result");
  const WaveNetConfig& cfg = model.config();
  check_arg(static_cast<int>(emb_init.embedding.size()) == cfg.embedding_dim,
            "sea_all: embedding dim mismatch in initialization");
  check_arg(spec.all_steps > 0 && spec.eval_interval > 0 && spec.patience >= 0,
            "sea_all: bad spec");

  WaveNet ft(cfg, model.params().clone());
  ParamSet voice;
  Parameter& e_param =
      voice.add("e", Tensor::from({cfg.embedding_dim}, emb_init.embedding));

  AdamConfig ac;
  ac.lr = spec.all_lr;
  Adam opt(std::vector<ParamSet*>{&ft.params(), &voice}, ac);

  std::vector<Item> items = cache_items(demos.demos, demos.stats, cfg);

  auto holdout_nll = [&]() {
    return mean_nll(ft, demos.holdout, demos.stats, e_param.t.v);
  };

  double best_nll = holdout_nll();  // evaluation point 0: the sea_emb start
  std::vector<double> best_w = ft.params().save_values();
  std::vector<double> best_e = e_param.t.v;
  int best_step = 0;

  int non_improving = 0;
  int steps_run = 0;
  for (int step = 0; step < spec.all_steps; ++step) {
    Rng rng(hash_seed(seed, 0x616c6c7374ULL, static_cast<uint64_t>(step)));
    crop_step(ft, e_param, opt, items, spec, rng, &ft.params());
    ++steps_run;
    if ((step + 1) % spec.eval_interval == 0) {
      double nll = holdout_nll();
      if (nll < best_nll) {
        best_nll = nll;
        best_w = ft.params().save_values();
        best_e = e_param.t.v;
        best_step = step + 1;
        non_improving = 0;
      } else if (++non_improving > spec.patience) {
        break;
      }
    }
  }

  ft.params().restore_values(best_w);

  AdaptedVoice out;
  out.method = "all";
  out.embedding = best_e;
  out.has_finetuned = true;
  out.finetuned = ft.params().clone();
  out.stats = demos.stats;
  out.model_config = cfg;
  double demo_nll = mean_nll(ft, demos.demos, demos.stats, best_e);
  out.provenance = make_provenance("all", steps_run, demo_nll, best_nll,
                                   demos.stats);
  out.provenance["best_snapshot_step"] = best_step;
  return out;
}

double voice_nll(const WaveNet& base, const AdaptedVoice& voice,
                 const std::vector<const Utterance*>& utts) {
  if (voice.has_finetuned) {
    WaveNet ft(voice.model_config, voice.finetuned.clone());
    return mean_nll(ft, utts, voice.stats, voice.embedding);
  }
  return mean_nll(base, utts, voice.stats, voice.embedding);
}

void save_voice(const std::string& path, const AdaptedVoice& voice) {
  nlohmann::json meta{
      {"kind", "voice"},
      {"method", voice.method},
      {"provenance", voice.provenance},
      {"f0_stats",
       {{"speaker_id", voice.stats.speaker_id},
        {"mean", voice.stats.mean},
        {"std", voice.stats.std}}},
      {"model_config", wavenet_config_to_json(voice.model_config)},
      {"has_finetuned", voice.has_finetuned},
  };
  ParamSet e_set;
  e_set.add("e", Tensor::from({int64_t(voice.embedding.size())}, voice.embedding));
  std::vector<std::pair<std::string, const ParamSet*>> sets{{"voice.", &e_set}};
  if (voice.has_finetuned) sets.push_back({"model.", &voice.finetuned});
  save_checkpoint(path, meta, sets);
}

AdaptedVoice load_voice(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  check_io(ckpt.meta.value("kind", "") == "voice",
           path + " is not a voice file");
  AdaptedVoice out;
  out.method = ckpt.meta.at("method").get<std::string>();
  out.provenance = ckpt.meta.at("provenance");
  out.stats.speaker_id = ckpt.meta.at("f0_stats").at("speaker_id").get<int>();
  out.stats.mean = ckpt.meta.at("f0_stats").at("mean").get<double>();
  out.stats.std = ckpt.meta.at("f0_stats").at("std").get<double>();
  out.model_config = wavenet_config_from_json(ckpt.meta.at("model_config"));
  ParamSet e_set = extract_prefixed(ckpt, "voice.");
  out.embedding = e_set.get("e").t.v;
  check_io(static_cast<int>(out.embedding.size()) == out.model_config.embedding_dim,
           "voice file embedding dim mismatch");
  out.has_finetuned = ckpt.meta.value("has_finetuned", false);
  if (out.has_finetuned) out.finetuned = extract_prefixed(ckpt, "model.");
  return out;
}

}  // namespace sea
