// corpus/corpus_io.cpp

#include "corpus/corpus_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "audio/wavio.hpp"
#include "common/binio.hpp"
#include "common/checksum.hpp"
#include "common/error.hpp"
#include "common/fsutil.hpp"

using json = nlohmann::json;

namespace sea {

json corpus_config_to_json(const CorpusConfig& c) {
  return json{{"sample_rate", c.sample_rate},
              {"frame_stride", c.frame_stride},
              {"phoneme_classes", c.phoneme_classes},
              {"train_speakers", c.train_speakers},
              {"heldout_speakers", c.heldout_speakers},
              {"utterances_per_train_speaker", c.utterances_per_train_speaker},
              {"utterances_per_heldout_speaker", c.utterances_per_heldout_speaker},
              {"frames_per_utterance", c.frames_per_utterance},
              {"test_count", c.test_count},
              {"holdout_fraction", c.holdout_fraction}};
}

CorpusConfig corpus_config_from_json(const json& j) {
  CorpusConfig c;
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.frame_stride = j.value("frame_stride", c.frame_stride);
  c.phoneme_classes = j.value("phoneme_classes", c.phoneme_classes);
  c.train_speakers = j.value("train_speakers", c.train_speakers);
  c.heldout_speakers = j.value("heldout_speakers", c.heldout_speakers);
  c.utterances_per_train_speaker =
      j.value("utterances_per_train_speaker", c.utterances_per_train_speaker);
  c.utterances_per_heldout_speaker = j.value("utterances_per_heldout_speaker",
                                             c.utterances_per_heldout_speaker);
  c.frames_per_utterance = j.value("frames_per_utterance", c.frames_per_utterance);
  c.test_count = j.value("test_count", c.test_count);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  return c;
}

void write_feature_sidecar(const std::string& path, const Utterance& u, int P) {
  std::ofstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path + " for writing");
  write_magic(f, "SEAF");
  write_u32(f, 1);
  write_u32(f, static_cast<uint32_t>(u.frames()));
  write_u32(f, static_cast<uint32_t>(P));
  for (int c : u.phoneme_codes) write_u16(f, static_cast<uint16_t>(c));
  for (double v : u.f0_hz) write_f64(f, v);
  for (int i = 0; i < u.frames(); ++i) write_u8(f, u.voiced(i) ? 1 : 0);
  f.flush();
  check_io(f.good(), "write failed on " + path);
}

void read_feature_sidecar(const std::string& path, Utterance& u, int expected_P) {
  std::ifstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path);
  expect_magic(f, "SEAF", "feature sidecar");
  uint32_t version = read_u32(f);
  check_io(version == 1, "feature sidecar: unsupported version");
  uint32_t frames = read_u32(f);
  uint32_t P = read_u32(f);
  check_arg(static_cast<int>(P) == expected_P,
            "feature sidecar: phoneme inventory mismatch in " + path);
  u.phoneme_codes.resize(frames);
  u.f0_hz.resize(frames);
  for (auto& c : u.phoneme_codes) c = read_u16(f);
  for (auto& v : u.f0_hz) v = read_f64(f);
  for (uint32_t i = 0; i < frames; ++i) {
    uint8_t flag = read_u8(f);
    check_arg((flag != 0) == (u.f0_hz[i] > 0.0),
              "feature sidecar: voicing flag inconsistent with f0 in " + path);
  }
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  make_dirs(path_join(dir, "wavs"));
  make_dirs(path_join(dir, "raw"));
  make_dirs(path_join(dir, "feat"));

  json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = corpus.seed;
  manifest["config"] = corpus_config_to_json(corpus.config);

  json speakers = json::array();
  for (const auto& s : corpus.speakers) {
    speakers.push_back(json{{"speaker_id", s.speaker_id},
                            {"train", corpus.is_train_speaker(s.speaker_id)},
                            {"harmonic_amplitudes", s.harmonic_amplitudes},
                            {"f0_mean", s.f0_mean},
                            {"f0_std", s.f0_std},
                            {"vibrato_rate", s.vibrato_rate},
                            {"vibrato_depth", s.vibrato_depth}});
  }
  manifest["speakers"] = speakers;

  json stats = json::array();
  for (const auto& [id, st] : corpus.train_stats)
    stats.push_back(json{{"speaker_id", id}, {"mean", st.mean}, {"std", st.std}});
  manifest["f0_stats"] = stats;

  json checksums = json::object();
  json utts = json::array();
  for (const auto& u : corpus.utterances) {
    std::string wav_rel = "wavs/" + u.id + ".wav";
    std::string raw_rel = "raw/" + u.id + ".f64";
    std::string feat_rel = "feat/" + u.id + ".seaf";
    write_wav(path_join(dir, wav_rel), u.waveform);
    write_raw_f64(path_join(dir, raw_rel), u.waveform);
    write_feature_sidecar(path_join(dir, feat_rel), u,
                          corpus.config.phoneme_classes);
    checksums[wav_rel] = crc32_hex(crc32_file(path_join(dir, wav_rel)));
    checksums[raw_rel] = crc32_hex(crc32_file(path_join(dir, raw_rel)));
    checksums[feat_rel] = crc32_hex(crc32_file(path_join(dir, feat_rel)));
    utts.push_back(json{{"id", u.id},
                        {"speaker_id", u.speaker_id},
                        {"frames", u.frames()},
                        {"wav", wav_rel},
                        {"raw", raw_rel},
                        {"features", feat_rel}});
  }
  manifest["utterances"] = utts;
  manifest["checksums"] = checksums;

  json splits = json::object();
  for (const auto& [id, split] : corpus.splits) {
    splits[std::to_string(id)] = json{{"adaptation", split.adaptation},
                                      {"test", split.test},
                                      {"holdout", split.holdout}};
  }
  manifest["splits"] = splits;

  write_text_file(path_join(dir, "manifest.json"), manifest.dump(2) + "\n");
}

Corpus load_corpus(const std::string& dir) {
  std::string manifest_path = path_join(dir, "manifest.json");
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + manifest_path + ": " + e.what());
  }

  try {
    check_arg(manifest.at("format_version") == 1,
              "corpus manifest: unsupported format version");

    // Verify every artifact before trusting any of it.
    for (const auto& [rel, hex] : manifest.at("checksums").items()) {
      std::string full = path_join(dir, rel);
      check_io(path_exists(full), "corpus artifact missing: " + rel);
      std::string actual = crc32_hex(crc32_file(full));
      check_arg(actual == hex.get<std::string>(),
                "corpus checksum mismatch for " + rel + " (expected " +
                    hex.get<std::string>() + ", got " + actual + ")");
    }

    Corpus corpus;
    corpus.seed = manifest.at("seed");
    corpus.config = corpus_config_from_json(manifest.at("config"));

    for (const auto& js : manifest.at("speakers")) {
      SyntheticSpeaker s;
      s.speaker_id = js.at("speaker_id");
      s.harmonic_amplitudes = js.at("harmonic_amplitudes").get<std::vector<double>>();
      s.f0_mean = js.at("f0_mean");
      s.f0_std = js.at("f0_std");
      s.vibrato_rate = js.at("vibrato_rate");
      s.vibrato_depth = js.at("vibrato_depth");
      if (js.at("train").get<bool>())
        corpus.train_speaker_ids.push_back(s.speaker_id);
      else
        corpus.heldout_speaker_ids.push_back(s.speaker_id);
      corpus.speakers.push_back(std::move(s));
    }

    for (const auto& js : manifest.at("f0_stats")) {
      SpeakerF0Stats st;
      st.speaker_id = js.at("speaker_id");
      st.mean = js.at("mean");
      st.std = js.at("std");
      corpus.train_stats[st.speaker_id] = st;
    }

    for (const auto& js : manifest.at("utterances")) {
      Utterance u;
      u.id = js.at("id");
      u.speaker_id = js.at("speaker_id");
      u.frame_stride = corpus.config.frame_stride;
      u.waveform = read_raw_f64(path_join(dir, js.at("raw").get<std::string>()));
      read_feature_sidecar(path_join(dir, js.at("features").get<std::string>()),
                           u, corpus.config.phoneme_classes);
      check_arg(static_cast<int>(js.at("frames")) == u.frames(),
                "corpus manifest frame count mismatch for " + u.id);
      check_arg(static_cast<int>(u.waveform.samples.size()) ==
                    u.frames() * u.frame_stride,
                "waveform/feature misalignment for " + u.id);
      corpus.speaker_utterances[u.speaker_id].push_back(
          static_cast<int>(corpus.utterances.size()));
      corpus.utterances.push_back(std::move(u));
    }

    for (const auto& [key, js] : manifest.at("splits").items()) {
      CorpusSplit split;
      split.adaptation = js.at("adaptation").get<std::vector<std::string>>();
      split.test = js.at("test").get<std::vector<std::string>>();
      split.holdout = js.at("holdout").get<std::vector<std::string>>();
      corpus.splits[std::stoi(key)] = std::move(split);
    }
    return corpus;
  } catch (const json::exception& e) {
    throw IoError("corpus manifest malformed: " + std::string(e.what()));
  }
}

}  // namespace sea
