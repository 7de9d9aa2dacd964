// diff/tensor.cpp

#include "diff/tensor.hpp"

#include <cmath>

#include "common/error.hpp"

namespace sea {

namespace {
int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    check_arg(d > 0, "tensor dims must be positive");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape_in) : shape(std::move(shape_in)) {
  v.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor Tensor::from(std::vector<int64_t> shape_in, std::vector<double> data) {
  Tensor t;
  t.shape = std::move(shape_in);
  check_arg(shape_numel(t.shape) == static_cast<int64_t>(data.size()),
            "tensor data size does not match shape");
  t.v = std::move(data);
  return t;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(v.size()); }

int64_t Tensor::dim(int i) const {
  check_arg(i >= 0 && i < rank(), "tensor dim index out of range");
  return shape[i];
}

void Tensor::ensure_grad() {
  if (g.empty()) g.assign(v.size(), 0.0);
}

void Tensor::zero_grad() {
  if (!g.empty()) g.assign(v.size(), 0.0);
}

bool Tensor::all_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (int i = 0; i < t.rank(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

Parameter& ParamSet::add(const std::string& name, Tensor t, bool trainable) {
  check_arg(!name.empty(), "parameter name must be nonempty");
  check_arg(!has(name), "duplicate parameter name: " + name);
  params_.push_back(Parameter{name, std::move(t), trainable});
  index_[name] = params_.size() - 1;
  return params_.back();
}

bool ParamSet::has(const std::string& name) const {
  return index_.count(name) != 0;
}

Parameter& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  check_arg(it != index_.end(), "no such parameter: " + name);
  return params_[it->second];
}

const Parameter& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  check_arg(it != index_.end(), "no such parameter: " + name);
  return params_[it->second];
}

void ParamSet::zero_grads() {
  for (auto& p : params_) {
    p.t.ensure_grad();
    p.t.zero_grad();
  }
}

int64_t ParamSet::total_values() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.t.numel();
  return n;
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& p : params_) {
    Tensor t;
    t.shape = p.t.shape;
    t.v = p.t.v;
    out.add(p.name, std::move(t), p.trainable);
  }
  return out;
}

std::vector<double> ParamSet::save_values() const {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(total_values()));
  for (const auto& p : params_) flat.insert(flat.end(), p.t.v.begin(), p.t.v.end());
  return flat;
}

void ParamSet::restore_values(const std::vector<double>& flat) {
  check_arg(static_cast<int64_t>(flat.size()) == total_values(),
            "restore_values: size mismatch");
  size_t off = 0;
  for (auto& p : params_) {
    std::copy(flat.begin() + off, flat.begin() + off + p.t.v.size(), p.t.v.begin());
    off += p.t.v.size();
  }
}

}  // namespace sea
