// model/checkpoint.cpp

#include "model/checkpoint.hpp"

#include <fstream>

#include "common/binio.hpp"
#include "common/error.hpp"

using json = nlohmann::json;

namespace sea {

void save_checkpoint(const std::string& path, const json& meta,
                     const std::vector<std::pair<std::string, const ParamSet*>>& sets,
                     const Adam* opt) {
  std::ofstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path + " for writing");
  write_magic(f, "SEAW");
  write_u32(f, 1);
  write_string(f, meta.dump());

  uint32_t count = 0;
  for (const auto& [prefix, set] : sets)
    count += static_cast<uint32_t>(set->size());
  write_u32(f, count);
  for (const auto& [prefix, set] : sets) {
    for (size_t i = 0; i < set->size(); ++i) {
      const Parameter& p = set->at(i);
      write_string(f, prefix + p.name);
      write_u32(f, static_cast<uint32_t>(p.t.rank()));
      for (int64_t d : p.t.shape) write_u64(f, static_cast<uint64_t>(d));
      for (double v : p.t.v) write_f64(f, v);
    }
  }

  write_u8(f, opt ? 1 : 0);
  if (opt) {
    write_u64(f, static_cast<uint64_t>(opt->step_count()));
    write_u32(f, static_cast<uint32_t>(opt->slots().size()));
    for (const auto& slot : opt->slots()) {
      // Adam slots are keyed by the bare parameter name; find its prefix.
      std::string full = slot.p->name;
      for (const auto& [prefix, set] : sets) {
        if (set->has(slot.p->name) && &set->get(slot.p->name) == slot.p) {
          full = prefix + slot.p->name;
          break;
        }
      }
      write_string(f, full);
      write_u64(f, slot.m.size());
      for (double v : slot.m) write_f64(f, v);
      for (double v : slot.v) write_f64(f, v);
    }
  }
  f.flush();
  check_io(f.good(), "write failed on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path);
  expect_magic(f, "SEAW", "checkpoint");
  uint32_t version = read_u32(f);
  check_io(version == 1, "checkpoint: unsupported format version");

  Checkpoint ckpt;
  std::string meta_str = read_string(f);
  try {
    ckpt.meta = json::parse(meta_str);
  } catch (const json::exception& e) {
    throw IoError("checkpoint: bad metadata JSON: " + std::string(e.what()));
  }

  uint32_t count = read_u32(f);
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(f);
    uint32_t rank = read_u32(f);
    check_io(rank <= 8, "checkpoint: implausible tensor rank");
    std::vector<int64_t> shape(rank);
    int64_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<int64_t>(read_u64(f));
      check_io(d > 0 && d <= (1 << 26), "checkpoint: implausible dimension");
      numel *= d;
    }
    Tensor t;
    t.shape = std::move(shape);
    t.v.resize(static_cast<size_t>(numel));
    for (auto& v : t.v) v = read_f64(f);
    ckpt.params.add(name, std::move(t));
  }

  uint8_t has_opt = read_u8(f);
  if (has_opt) {
    ckpt.has_opt = true;
    ckpt.opt_step = static_cast<int64_t>(read_u64(f));
    uint32_t slots = read_u32(f);
    for (uint32_t i = 0; i < slots; ++i) {
      Checkpoint::OptSlot slot;
      slot.name = read_string(f);
      uint64_t n = read_u64(f);
      check_io(n <= (1ull << 30), "checkpoint: implausible slot size");
      slot.m.resize(static_cast<size_t>(n));
      slot.v.resize(static_cast<size_t>(n));
      for (auto& v : slot.m) v = read_f64(f);
      for (auto& v : slot.v) v = read_f64(f);
      ckpt.opt_slots.push_back(std::move(slot));
    }
  }
  return ckpt;
}

ParamSet extract_prefixed(const Checkpoint& ckpt, const std::string& prefix) {
  ParamSet out;
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    const Parameter& p = ckpt.params.at(i);
    if (p.name.rfind(prefix, 0) != 0) continue;
    Tensor t;
    t.shape = p.t.shape;
    t.v = p.t.v;
    out.add(p.name.substr(prefix.size()), std::move(t));
  }
  return out;
}

void restore_adam(Adam& opt, const Checkpoint& ckpt, const std::string& prefix) {
  check_arg(ckpt.has_opt, "checkpoint has no optimizer state");
  opt.set_step_count(ckpt.opt_step);
  for (auto& slot : opt.slots()) {
    std::string want = prefix + slot.p->name;
    bool found = false;
    for (const auto& saved : ckpt.opt_slots) {
      if (saved.name != want) continue;
      check_arg(saved.m.size() == slot.m.size(),
                "optimizer slot size mismatch for " + want);
      slot.m = saved.m;
      slot.v = saved.v;
      found = true;
      break;
    }
    check_arg(found, "optimizer state missing for " + want);
  }
}

json wavenet_config_to_json(const WaveNetConfig& cfg) {
  return json{{"quantization", cfg.quantization},
              {"residual_channels", cfg.residual_channels},
              {"skip_channels", cfg.skip_channels},
              {"dilation_cycle", cfg.dilation_cycle},
              {"kernel_width", cfg.kernel_width},
              {"embedding_dim", cfg.embedding_dim},
              {"frame_stride", cfg.frame_stride},
              {"num_speakers", cfg.num_speakers}};
}

WaveNetConfig wavenet_config_from_json(const json& j) {
  WaveNetConfig cfg;
  cfg.quantization = j.value("quantization", cfg.quantization);
  cfg.residual_channels = j.value("residual_channels", cfg.residual_channels);
  cfg.skip_channels = j.value("skip_channels", cfg.skip_channels);
  cfg.dilation_cycle = j.value("dilation_cycle", cfg.dilation_cycle);
  cfg.kernel_width = j.value("kernel_width", cfg.kernel_width);
  cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
  cfg.frame_stride = j.value("frame_stride", cfg.frame_stride);
  cfg.num_speakers = j.value("num_speakers", cfg.num_speakers);
  cfg.validate();
  return cfg;
}

}  // namespace sea
