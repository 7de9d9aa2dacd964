// corpus/corpus_io.hpp
//
// Corpus on disk: manifest.json at the root, then per utterance a 16-bit
// WAV (audible), a raw float64 waveform (lossless, what training reads),
// and a "SEAF" feature sidecar with phoneme codes, f0 track, and voicing
// flags.  The manifest records a CRC-32 for every artifact and loading
// verifies all of them.

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "corpus/corpus.hpp"

namespace sea {

nlohmann::json corpus_config_to_json(const CorpusConfig& c);
CorpusConfig corpus_config_from_json(const nlohmann::json& j);

void write_feature_sidecar(const std::string& path, const Utterance& u, int P);
// Fills phoneme_codes and f0_hz; caller provides waveform/stride.
void read_feature_sidecar(const std::string& path, Utterance& u, int expected_P);

void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

}  // namespace sea
