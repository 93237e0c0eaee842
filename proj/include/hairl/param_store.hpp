// Named parameter tensors with matching gradient accumulators, the Adam
// update, and a text checkpoint container that round-trips bit-exactly.
#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hairl/core.hpp"

namespace hairl {

class ParamStore {
 public:
  void add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw ArgumentError("duplicate parameter: " + name);
    index_[name] = static_cast<int>(names_.size());
    names_.push_back(name);
    grads_.push_back(Tensor::zeros(init.shape));
    values_.push_back(std::move(init));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& value(const std::string& name) { return values_[idx(name)]; }
  const Tensor& value(const std::string& name) const {
    return values_[idx(name)];
  }
  Tensor& grad(const std::string& name) { return grads_[idx(name)]; }
  const Tensor& grad(const std::string& name) const {
    return grads_[idx(name)];
  }

  const std::vector<std::string>& names() const { return names_; }

  void zero_grads() {
    for (auto& g : grads_) g.fill(0.0);
  }

  // copy values for all parameters whose name starts with prefix;
  // shapes must match on both sides
  void copy_from(const ParamStore& src, const std::string& prefix) {
    for (const auto& name : src.names_) {
      if (name.rfind(prefix, 0) != 0) continue;
      if (!has(name)) throw ArgumentError("copy_from: missing target " + name);
      Tensor& dst = value(name);
      const Tensor& s = src.value(name);
      if (!dst.same_shape(s))
        throw ArgumentError("copy_from: shape mismatch for " + name);
      dst.data = s.data;
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "hairl-params 1\n" << names_.size() << "\n";
    char buf[64];
    for (size_t k = 0; k < names_.size(); ++k) {
      const Tensor& t = values_[k];
      out << names_[k] << " " << t.shape.size();
      for (int d : t.shape) out << " " << d;
      out << "\n";
      for (size_t i = 0; i < t.data.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", t.data[i]);
        out << (i ? " " : "") << buf;
      }
      out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
  }

  static ParamStore load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for read: " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "hairl-params" || version != 1)
      throw ParseError("not a parameter checkpoint: " + path);
    size_t count = 0;
    in >> count;
    ParamStore store;
    for (size_t k = 0; k < count; ++k) {
      std::string name;
      int ndim = 0;
      in >> name >> ndim;
      std::vector<int> shape(ndim);
      for (int& d : shape) in >> d;
      Tensor t = Tensor::zeros(shape);
      for (double& v : t.data) in >> v;
      if (!in) throw ParseError("truncated checkpoint: " + path);
      store.add(name, std::move(t));
    }
    return store;
  }

 private:
  int idx(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
    return it->second;
  }

  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::unordered_map<std::string, int> index_;
};

// uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)]
inline Tensor init_matrix(int fan_in, int rows, int cols, Rng& rng) {
  double bound = std::sqrt(1.0 / fan_in);
  Tensor t = Tensor::zeros({rows, cols});
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

inline Tensor init_linear_weight(int in, int out, Rng& rng) {
  return init_matrix(in, in, out, rng);
}

class Adam {
 public:
  Adam(ParamStore& store, std::string prefix, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : store_(&store),
        prefix_(std::move(prefix)),
        lr_(lr),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {
    for (const auto& name : store.names()) {
      if (name.rfind(prefix_, 0) != 0) continue;
      targets_.push_back(name);
      m_.push_back(Tensor::zeros(store.value(name).shape));
      v_.push_back(Tensor::zeros(store.value(name).shape));
    }
  }

  // one update from the currently accumulated gradients
  void step() {
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, t_);
    double c2 = 1.0 - std::pow(beta2_, t_);
    for (size_t k = 0; k < targets_.size(); ++k) {
      Tensor& val = store_->value(targets_[k]);
      const Tensor& g = store_->grad(targets_[k]);
      for (size_t i = 0; i < val.data.size(); ++i) {
        double gi = g.data[i];
        m_[k].data[i] = beta1_ * m_[k].data[i] + (1.0 - beta1_) * gi;
        v_[k].data[i] = beta2_ * v_[k].data[i] + (1.0 - beta2_) * gi * gi;
        double mhat = m_[k].data[i] / c1;
        double vhat = v_[k].data[i] / c2;
        val.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  ParamStore* store_;
  std::string prefix_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<std::string> targets_;
  std::vector<Tensor> m_, v_;
};

// Central finite-difference validation of analytic gradients.
//
// loss_fn must zero the store's gradients, evaluate the loss, accumulate
// analytic gradients, and return the loss value; it must be deterministic.
// Returns max over checked components of |analytic - fd| / max(1, |fd|).
// max_components == 0 checks every component; otherwise a seeded random
// subsample of that size is checked.
inline double grad_check(const std::function<double()>& loss_fn,
                         ParamStore& store, double eps,
                         int max_components = 0, uint64_t sample_seed = 1234) {
  double base = loss_fn();
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");
  std::vector<Tensor> analytic;
  for (const auto& name : store.names()) analytic.push_back(store.grad(name));

  std::vector<std::pair<int, int>> comps;  // (param index, component)
  for (size_t k = 0; k < store.names().size(); ++k)
    for (int i = 0; i < store.value(store.names()[k]).numel(); ++i)
      comps.emplace_back(static_cast<int>(k), i);
  if (max_components > 0 && static_cast<int>(comps.size()) > max_components) {
    Rng rng(sample_seed);
    // partial Fisher-Yates: the first max_components entries become the sample
    for (int i = 0; i < max_components; ++i) {
      int j = i + rng.uniform_int(static_cast<int>(comps.size()) - i);
      std::swap(comps[i], comps[j]);
    }
    comps.resize(max_components);
  }

  double worst = 0.0;
  for (auto [k, i] : comps) {
    Tensor& val = store.value(store.names()[k]);
    double saved = val.data[i];
    val.data[i] = saved + eps;
    double up = loss_fn();
    val.data[i] = saved - eps;
    double down = loss_fn();
    val.data[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("grad_check: non-finite loss under perturbation");
    double fd = (up - down) / (2.0 * eps);
    double err = std::abs(analytic[k].data[i] - fd) / std::max(1.0, std::abs(fd));
    if (err > worst) worst = err;
  }
  // leave the store in the state loss_fn produces
  loss_fn();
  return worst;
}

}  // namespace hairl
