// diff/tensor.hpp
//
// Dense double-precision tensors plus named parameter collections.
// Gradients live beside values and are allocated lazily; everything is
// float64 so finite-difference checks against analytic gradients can be
// tight (1e-4 relative) instead of approximate.

#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

namespace sea {

class Rng;

struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> v;  // values, row-major
  std::vector<double> g;  // gradient, empty until ensure_grad()

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape_in);
  static Tensor from(std::vector<int64_t> shape_in, std::vector<double> data);

  int64_t numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const;

  void ensure_grad();        // allocate zeros if absent
  void zero_grad();          // zero if allocated
  bool has_grad() const { return !g.empty(); }
  bool all_finite() const;   // over values

  // 2-D helpers (rows x cols, row-major).
  double& at2(int64_t r, int64_t c) { return v[r * shape[1] + c]; }
  double at2(int64_t r, int64_t c) const { return v[r * shape[1] + c]; }
};

std::string shape_str(const Tensor& t);

struct Parameter {
  std::string name;
  Tensor t;
  bool trainable = true;
};

// Named parameters with stable addresses and deterministic order.
class ParamSet {
 public:
  Parameter& add(const std::string& name, Tensor t, bool trainable = true);
  bool has(const std::string& name) const;
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  size_t size() const { return params_.size(); }
  Parameter& at(size_t i) { return params_[i]; }
  const Parameter& at(size_t i) const { return params_[i]; }

  void zero_grads();
  int64_t total_values() const;
  ParamSet clone() const;  // deep copy, grads not carried over

  // Flat copies of every value, in parameter order; used for snapshots.
  std::vector<double> save_values() const;
  void restore_values(const std::vector<double>& flat);

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, size_t> index_;
};

// Scope guard: marks every parameter non-trainable so a tape pass built
// inside the scope records no backward work, then restores the flags.
class FreezeGuard {
 public:
  explicit FreezeGuard(ParamSet& ps) : ps_(ps) {
    saved_.reserve(ps.size());
    for (size_t i = 0; i < ps.size(); ++i) {
      saved_.push_back(ps.at(i).trainable);
      ps.at(i).trainable = false;
    }
  }
  ~FreezeGuard() {
    for (size_t i = 0; i < saved_.size(); ++i) ps_.at(i).trainable = saved_[i];
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParamSet& ps_;
  std::vector<bool> saved_;
};

}  // namespace sea
