// model/checkpoint.hpp
//
// "SEAW" checkpoints: magic, format version, a JSON metadata block
// (model kind, config, step counters, provenance), then flat parameter
// records (name, shape, float64 data), little-endian throughout.  An
// optional optimizer section after the parameter records lets training
// resume bit-exactly.  Round trips are bit-exact.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "diff/adam.hpp"
#include "diff/tensor.hpp"
#include "model/wavenet.hpp"

namespace sea {

struct Checkpoint {
  nlohmann::json meta;
  ParamSet params;
  bool has_opt = false;
  int64_t opt_step = 0;
  struct OptSlot {
    std::string name;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<OptSlot> opt_slots;
};

// Each set is written with its prefix prepended to every parameter name;
// pass {"", &set} for a flat checkpoint.
void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const ParamSet*>>& sets,
                     const Adam* opt = nullptr);

Checkpoint load_checkpoint(const std::string& path);

// Parameters whose names start with prefix, with the prefix stripped.
ParamSet extract_prefixed(const Checkpoint& ckpt, const std::string& prefix);

// Copies matching optimizer slots (after prefix stripping) into opt and
// restores the step counter.
void restore_adam(Adam& opt, const Checkpoint& ckpt,
                  const std::string& prefix = "");

nlohmann::json wavenet_config_to_json(const WaveNetConfig& cfg);
WaveNetConfig wavenet_config_from_json(const nlohmann::json& j);

}  // namespace sea
