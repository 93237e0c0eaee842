// Recurrent variational posterior over option sequences. Each timestep emits
// a categorical over the N options from (embedded X_t, one-hot Z_{t-1}, h)
// and then advances the hidden state with a gated-recurrent update, so the
// emission at time t is conditioned on the whole history X_{0:t}, Z_{0:t-1}.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hairl/core.hpp"
#include "hairl/param_store.hpp"
#include "hairl/tape.hpp"

namespace hairl {

struct PosteriorConfig {
  int state_dim = 0;
  int action_dim = 0;  // action representation size (one-hot for discrete)
  int num_options = 1;
  int x_embed = 16;
  int hidden = 64;
};

struct PosteriorState {
  Var h;
  int t = 0;
};

class RecurrentPosterior {
 public:
  RecurrentPosterior() = default;
  RecurrentPosterior(PosteriorConfig cfg, std::string prefix = "posterior.")
      : cfg_(cfg), prefix_(std::move(prefix)) {}

  const PosteriorConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }
  int x_dim() const { return cfg_.state_dim + cfg_.action_dim; }

  void init_params(ParamStore& s, Rng& rng) const {
    s.add(prefix_ + "emb_w", init_linear_weight(x_dim(), cfg_.x_embed, rng));
    s.add(prefix_ + "emb_b", Tensor::zeros({cfg_.x_embed}));
    add_gru_params(s, prefix_ + "gru.", cfg_.x_embed + cfg_.num_options,
                   cfg_.hidden, rng);
    int head_in = cfg_.x_embed + cfg_.num_options + cfg_.hidden;
    s.add(prefix_ + "head_w",
          init_linear_weight(head_in, cfg_.num_options, rng));
    s.add(prefix_ + "head_b", Tensor::zeros({cfg_.num_options}));
  }

  PosteriorState init_state(Tape& t) const {
    return PosteriorState{t.constant(Tensor::zeros({cfg_.hidden})), 0};
  }

  // X_t = (A_{t-1}, S_t) as raw concatenated features; A_{-1} is all-zero
  Tensor x_features(const std::vector<double>& action_prev,
                    const std::vector<double>& state) const {
    std::vector<double> x;
    x.reserve(x_dim());
    x.insert(x.end(), action_prev.begin(), action_prev.end());
    x.insert(x.end(), state.begin(), state.end());
    if (static_cast<int>(x.size()) != x_dim())
      throw DimensionError("posterior: X_t feature size mismatch");
    return Tensor::vec(std::move(x));
  }

  // Emits log P(. | X_t, Z_{t-1}, h_{t-1}) and the advanced state.
  std::pair<Var, PosteriorState> step(Tape& t, const PosteriorState& st,
                                      const Tensor& x_t, int z_prev) const {
    if (z_prev < 0 || z_prev >= cfg_.num_options)
      throw ArgumentError("posterior: option index out of range");
    if (x_t.numel() != x_dim())
      throw DimensionError("posterior: X_t dimension mismatch");
    Var ex = t.linear(t.constant(x_t), t.param(prefix_ + "emb_w"),
                      t.param(prefix_ + "emb_b"));
    Var zv = t.constant(one_hot(cfg_.num_options, z_prev));
    Var head_in = t.concat({ex, zv, st.h});
    Var log_probs = t.log_softmax(t.linear(head_in, t.param(prefix_ + "head_w"),
                                           t.param(prefix_ + "head_b")));
    GruVars gru = bind_gru(t, prefix_ + "gru.");
    Var h_next = gru_cell(t, t.concat({ex, zv}), st.h, gru);
    return {log_probs, PosteriorState{h_next, st.t + 1}};
  }

  // log P(Z_{1:T} | X_{0:T}) = sum_t log P(Z_t | X_{0:t}, Z_{0:t-1}).
  // xs holds X_0..X_T feature vectors; options holds Z_0..Z_T with the dummy
  // Z_0 in front.
  Var sequence_log_prob(Tape& t, const std::vector<Tensor>& xs,
                        const std::vector<int>& options) const {
    if (xs.size() != options.size() || xs.empty())
      throw ArgumentError("posterior: X/Z length mismatch");
    PosteriorState st = init_state(t);
    // absorb X_0 with the dummy previous option; the emission is unused
    st = step(t, st, xs[0], 0).second;
    Var total = t.constant_scalar(0.0);
    for (size_t i = 1; i < xs.size(); ++i) {
      auto [lp, next] = step(t, st, xs[i], options[i - 1]);
      total = t.add(total, t.pick(lp, options[i]));
      st = next;
    }
    return total;
  }

  // per-step log P(Z_t | X_{0:t}, Z_{0:t-1}) values for t = 1..T
  std::vector<double> step_log_probs(ParamStore& s,
                                     const std::vector<Tensor>& xs,
                                     const std::vector<int>& options) const {
    if (xs.size() != options.size() || xs.empty())
      throw ArgumentError("posterior: X/Z length mismatch");
    Tape t(&s);
    PosteriorState st = init_state(t);
    st = step(t, st, xs[0], 0).second;
    std::vector<double> out;
    out.reserve(xs.size() - 1);
    for (size_t i = 1; i < xs.size(); ++i) {
      auto [lp, next] = step(t, st, xs[i], options[i - 1]);
      out.push_back(t.val(lp).at(options[i]));
      st = next;
    }
    return out;
  }

  // samples Z_{0:T} given X_{0:T}; Z_0 is the dummy option 0
  std::vector<int> e_step_sample(ParamStore& s, const std::vector<Tensor>& xs,
                                 Rng& rng) const {
    Tape t(&s);
    PosteriorState st = init_state(t);
    st = step(t, st, xs[0], 0).second;
    std::vector<int> options(xs.size(), 0);
    for (size_t i = 1; i < xs.size(); ++i) {
      auto [lp, next] = step(t, st, xs[i], options[i - 1]);
      std::vector<double> p(t.val(lp).data);
      for (double& v : p) v = std::exp(v);
      options[i] = rng.categorical(p);
      st = next;
    }
    return options;
  }

 private:
  PosteriorConfig cfg_;
  std::string prefix_ = "posterior.";
};

}  // namespace hairl
