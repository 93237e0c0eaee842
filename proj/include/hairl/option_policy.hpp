// Marginalized one-step option policy: a multi-head-attention high-level
// policy over an option context matrix, a per-option low-level policy, and
// their chain-rule composition on the extended state/action space.
#pragma once

#include <string>
#include <vector>

#include "hairl/core.hpp"
#include "hairl/param_store.hpp"
#include "hairl/tape.hpp"

namespace hairl {

// scaled to vector sizes used here: output = sum_i softmax(q.K)_i * V_i
inline Var attention(Tape& t, Var q, Var K, Var V) {
  if (t.val(K).ndim() != 2 || t.val(K).rows() < 1)
    throw DimensionError("attention: K must have at least one row");
  if (t.val(K).rows() != t.val(V).rows())
    throw DimensionError("attention: K/V row mismatch");
  Var scores = t.matvec(K, q);
  Var weights = t.softmax(scores);
  return t.matvec_t(V, weights);
}

struct MhaWeights {
  std::vector<Var> wq, wk, wv;  // per head, [d x d]
  Var wo;                       // [(heads*d_v) x d_v]
};

inline Var mha(Tape& t, Var q, Var K, Var V, const MhaWeights& w) {
  if (w.wq.empty()) throw DimensionError("mha: needs at least one head");
  std::vector<Var> heads;
  heads.reserve(w.wq.size());
  for (size_t i = 0; i < w.wq.size(); ++i) {
    Var qh = t.matvec_t(w.wq[i], q);
    Var kh = t.matmul(K, w.wk[i]);
    Var vh = t.matmul(V, w.wv[i]);
    heads.push_back(attention(t, qh, kh, vh));
  }
  return t.matvec_t(w.wo, t.concat(heads));
}

struct PolicyConfig {
  int state_dim = 0;
  int num_options = 1;
  int embed_dim = 8;
  int heads = 2;
  int action_dim = 0;  // number of discrete actions, or continuous dimension
  bool discrete_actions = true;
  int hidden = 64;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
};

class HierarchicalPolicy {
 public:
  HierarchicalPolicy() = default;
  HierarchicalPolicy(PolicyConfig cfg, std::string prefix = "policy.")
      : cfg_(cfg), prefix_(std::move(prefix)) {}

  const PolicyConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

  void init_params(ParamStore& s, Rng& rng) const {
    int n = cfg_.num_options, e = cfg_.embed_dim;
    // the context matrix maps one-hot options, so its fan-in is N
    s.add(prefix_ + "wc", init_matrix(n, n, e, rng));
    int q_in = cfg_.state_dim + e;
    s.add(prefix_ + "hi.in_w", init_linear_weight(q_in, e, rng));
    s.add(prefix_ + "hi.in_b", Tensor::zeros({e}));
    for (int h = 0; h < cfg_.heads; ++h) {
      std::string hs = std::to_string(h);
      s.add(prefix_ + "hi.wq" + hs, init_matrix(e, e, e, rng));
      s.add(prefix_ + "hi.wk" + hs, init_matrix(e, e, e, rng));
      s.add(prefix_ + "hi.wv" + hs, init_matrix(e, e, e, rng));
    }
    s.add(prefix_ + "hi.wo", init_matrix(cfg_.heads * e, cfg_.heads * e, e, rng));
    int lo_in = cfg_.state_dim + e;
    s.add(prefix_ + "lo.w0", init_linear_weight(lo_in, cfg_.hidden, rng));
    s.add(prefix_ + "lo.b0", Tensor::zeros({cfg_.hidden}));
    s.add(prefix_ + "lo.w1", init_linear_weight(cfg_.hidden, cfg_.hidden, rng));
    s.add(prefix_ + "lo.b1", Tensor::zeros({cfg_.hidden}));
    s.add(prefix_ + "lo.head_w",
          init_linear_weight(cfg_.hidden, cfg_.action_dim, rng));
    s.add(prefix_ + "lo.head_b", Tensor::zeros({cfg_.action_dim}));
    if (!cfg_.discrete_actions)
      s.add(prefix_ + "lo.log_std", Tensor::zeros({cfg_.action_dim}));
  }

  // context embedding of option z (a row of W_C)
  Var option_context(Tape& t, int z) const {
    Var wc = t.param(prefix_ + "wc");
    return t.matvec_t(wc, t.constant(one_hot(cfg_.num_options, z)));
  }

  // log pi_theta(. | S, Z_prev) over the N options
  Var high_log_probs(Tape& t, const Tensor& state, int z_prev) const {
    check_state(state);
    check_option(z_prev);
    Var wc = t.param(prefix_ + "wc");
    Var q = t.linear(t.concat({t.constant(state), option_context(t, z_prev)}),
                     t.param(prefix_ + "hi.in_w"), t.param(prefix_ + "hi.in_b"));
    MhaWeights w;
    for (int h = 0; h < cfg_.heads; ++h) {
      std::string hs = std::to_string(h);
      w.wq.push_back(t.param(prefix_ + "hi.wq" + hs));
      w.wk.push_back(t.param(prefix_ + "hi.wk" + hs));
      w.wv.push_back(t.param(prefix_ + "hi.wv" + hs));
    }
    w.wo = t.param(prefix_ + "hi.wo");
    Var dense = mha(t, q, wc, wc, w);
    // option score: inner product of the attended embedding with each context row
    return t.log_softmax(t.matvec(wc, dense));
  }

  Var high_entropy(Tape& t, const Tensor& state, int z_prev) const {
    return t.entropy_from_log_probs(high_log_probs(t, state, z_prev));
  }

  // trunk of pi_phi(. | S, Z): returns the action head output (logits or mean)
  Var low_head(Tape& t, const Tensor& state, int z) const {
    check_state(state);
    check_option(z);
    Var x = t.concat({t.constant(state), option_context(t, z)});
    Var h0 = t.tanh_(
        t.linear(x, t.param(prefix_ + "lo.w0"), t.param(prefix_ + "lo.b0")));
    Var h1 = t.tanh_(
        t.linear(h0, t.param(prefix_ + "lo.w1"), t.param(prefix_ + "lo.b1")));
    return t.linear(h1, t.param(prefix_ + "lo.head_w"),
                    t.param(prefix_ + "lo.head_b"));
  }

  Var low_log_probs_discrete(Tape& t, const Tensor& state, int z) const {
    if (!cfg_.discrete_actions)
      throw ArgumentError("policy has continuous actions");
    return t.log_softmax(low_head(t, state, z));
  }

  Var clamped_log_std(Tape& t) const {
    return t.clamp(t.param(prefix_ + "lo.log_std"), cfg_.log_std_min,
                   cfg_.log_std_max);
  }

  // log pi_phi(A | S, Z); discrete actions passed as a single-element tensor
  // holding the action index
  Var low_log_prob(Tape& t, const Tensor& state, int z,
                   const Tensor& action) const {
    if (cfg_.discrete_actions) {
      int a = static_cast<int>(action.at(0));
      return t.pick(low_log_probs_discrete(t, state, z), a);
    }
    if (action.numel() != cfg_.action_dim)
      throw DimensionError("low_log_prob: action dimension mismatch");
    Var mean = low_head(t, state, z);
    Var log_std = clamped_log_std(t);
    Var inv_std = t.exp_(t.neg(log_std));
    Var diff = t.mul(t.sub(t.constant(action), mean), inv_std);
    Var quad = t.scale(t.dot(diff, diff), 0.5);
    Var log_norm = t.add_scalar(
        t.sum(log_std), 0.5 * cfg_.action_dim * std::log(2.0 * 3.141592653589793));
    return t.neg(t.add(quad, log_norm));
  }

  // log pi_theta(Z|S,Z') + log pi_phi(A|S,Z)
  Var joint_log_prob(Tape& t, const Tensor& state, int z_prev, int z,
                     const Tensor& action) const {
    Var hi = t.pick(high_log_probs(t, state, z_prev), z);
    return t.add(hi, low_log_prob(t, state, z, action));
  }

  // ---- sampling (no gradients kept) ----

  int sample_option(ParamStore& s, const Tensor& state, int z_prev, Rng& rng,
                    double* log_prob = nullptr) const {
    Tape t(&s);
    Var lp = high_log_probs(t, state, z_prev);
    std::vector<double> p(t.val(lp).data);
    for (double& v : p) v = std::exp(v);
    int z = rng.categorical(p);
    if (log_prob) *log_prob = t.val(lp).at(z);
    return z;
  }

  int argmax_option(ParamStore& s, const Tensor& state, int z_prev) const {
    Tape t(&s);
    const Tensor& lp = t.val(high_log_probs(t, state, z_prev));
    int best = 0;
    for (int i = 1; i < lp.numel(); ++i)
      if (lp.at(i) > lp.at(best)) best = i;
    return best;
  }

  Tensor sample_action(ParamStore& s, const Tensor& state, int z, Rng& rng,
                       double* log_prob = nullptr) const {
    Tape t(&s);
    if (cfg_.discrete_actions) {
      Var lp = low_log_probs_discrete(t, state, z);
      std::vector<double> p(t.val(lp).data);
      for (double& v : p) v = std::exp(v);
      int a = rng.categorical(p);
      if (log_prob) *log_prob = t.val(lp).at(a);
      return Tensor::vec({static_cast<double>(a)});
    }
    Var mean = low_head(t, state, z);
    Var log_std = clamped_log_std(t);
    Tensor action = t.val(mean);
    double lp = 0.0;
    for (int d = 0; d < cfg_.action_dim; ++d) {
      double sd = std::exp(t.val(log_std).at(d));
      double eps = rng.normal();
      action.at(d) += sd * eps;
      lp += -0.5 * eps * eps - t.val(log_std).at(d) -
            0.5 * std::log(2.0 * 3.141592653589793);
    }
    if (log_prob) *log_prob = lp;
    return action;
  }

  Tensor greedy_action(ParamStore& s, const Tensor& state, int z) const {
    Tape t(&s);
    if (cfg_.discrete_actions) {
      const Tensor& lp = t.val(low_log_probs_discrete(t, state, z));
      int best = 0;
      for (int i = 1; i < lp.numel(); ++i)
        if (lp.at(i) > lp.at(best)) best = i;
      return Tensor::vec({static_cast<double>(best)});
    }
    return t.val(low_head(t, state, z));
  }

 private:
  void check_state(const Tensor& state) const {
    if (state.numel() != cfg_.state_dim)
      throw DimensionError("state dimension mismatch");
  }
  void check_option(int z) const {
    if (z < 0 || z >= cfg_.num_options)
      throw ArgumentError("option index out of range");
  }

  PolicyConfig cfg_;
  std::string prefix_ = "policy.";
};

}  // namespace hairl
