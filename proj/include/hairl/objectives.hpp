// Training objectives: the extended AIRL discriminator with its
// cross-entropy loss and imitation reward, the GAIL-style ablation
// discriminator, the variational directed-information bound, and the
// combined per-step return.
#pragma once

#include <string>
#include <vector>

#include "hairl/core.hpp"
#include "hairl/option_policy.hpp"
#include "hairl/param_store.hpp"
#include "hairl/posterior.hpp"
#include "hairl/rollout.hpp"
#include "hairl/tape.hpp"

namespace hairl {

struct DiscConfig {
  int state_dim = 0;
  int num_options = 1;
  int action_repr_dim = 0;  // one-hot size for discrete actions
  int hidden = 64;
};

// shared MLP trunk for both discriminators; input is the extended tuple
// (S_t, Z_t, Z_{t+1}, A_t)
class TupleMlp {
 public:
  TupleMlp() = default;
  TupleMlp(DiscConfig cfg, std::string prefix) : cfg_(cfg), prefix_(prefix) {}

  const DiscConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

  void init_params(ParamStore& s, Rng& rng) const {
    int in = cfg_.state_dim + 2 * cfg_.num_options + cfg_.action_repr_dim;
    s.add(prefix_ + "w0", init_linear_weight(in, cfg_.hidden, rng));
    s.add(prefix_ + "b0", Tensor::zeros({cfg_.hidden}));
    s.add(prefix_ + "w1", init_linear_weight(cfg_.hidden, cfg_.hidden, rng));
    s.add(prefix_ + "b1", Tensor::zeros({cfg_.hidden}));
    s.add(prefix_ + "w2", init_linear_weight(cfg_.hidden, 1, rng));
    s.add(prefix_ + "b2", Tensor::zeros({1}));
  }

  Var forward(Tape& t, const Tensor& state, int z, int z_next,
              const Tensor& action_repr) const {
    if (z < 0 || z >= cfg_.num_options || z_next < 0 ||
        z_next >= cfg_.num_options)
      throw ArgumentError("discriminator: option index out of range");
    Var x = t.concat({t.constant(state),
                      t.constant(one_hot(cfg_.num_options, z)),
                      t.constant(one_hot(cfg_.num_options, z_next)),
                      t.constant(action_repr)});
    Var h0 = t.tanh_(t.linear(x, t.param(prefix_ + "w0"), t.param(prefix_ + "b0")));
    Var h1 = t.tanh_(t.linear(h0, t.param(prefix_ + "w1"), t.param(prefix_ + "b1")));
    return t.pick(t.linear(h1, t.param(prefix_ + "w2"), t.param(prefix_ + "b2")), 0);
  }

 private:
  DiscConfig cfg_;
  std::string prefix_;
};

// one extended transition with the policy density evaluated at it
struct ExtTuple {
  Tensor state;
  int z = 0;
  int z_next = 0;
  Tensor action_repr;  // discriminator input representation
  Tensor action;       // policy-facing action (index for discrete)
  double log_pi = 0.0; // log pi_{theta,phi}(Z_{t+1}, A_t | S_t, Z_t)
};

// ---- AIRL discriminator: D = exp(f) / (exp(f) + pi) ----

// all ratios handled in log space
inline double disc_log_d(double f, double log_pi) {
  double m = std::max(f, log_pi);
  return f - (m + std::log(std::exp(f - m) + std::exp(log_pi - m)));
}
inline double disc_log_one_minus_d(double f, double log_pi) {
  double m = std::max(f, log_pi);
  return log_pi - (m + std::log(std::exp(f - m) + std::exp(log_pi - m)));
}
inline double disc_prob(double f, double log_pi) {
  return std::exp(disc_log_d(f, log_pi));
}
// logit(D) = f - log pi, the per-step imitation reward
inline double reward_il(double f, double log_pi) { return f - log_pi; }

// cross-entropy of Eq-10 form, normalized per step on each side; the policy
// density inside D is a constant, gradients reach only the f network
inline Var disc_loss(Tape& t, const TupleMlp& f_net,
                     const std::vector<ExtTuple>& expert,
                     const std::vector<ExtTuple>& policy) {
  if (expert.empty() || policy.empty())
    throw ArgumentError("disc_loss: empty batch");
  std::vector<Var> expert_terms, policy_terms;
  expert_terms.reserve(expert.size());
  policy_terms.reserve(policy.size());
  for (const auto& s : expert) {
    Var f = f_net.forward(t, s.state, s.z, s.z_next, s.action_repr);
    Var log_d = t.sub(f, t.logaddexp(f, t.constant_scalar(s.log_pi)));
    expert_terms.push_back(log_d);
  }
  for (const auto& s : policy) {
    Var f = f_net.forward(t, s.state, s.z, s.z_next, s.action_repr);
    Var log_pi = t.constant_scalar(s.log_pi);
    Var log_1md = t.sub(log_pi, t.logaddexp(f, log_pi));
    policy_terms.push_back(log_1md);
  }
  Var le = t.mean(t.concat(expert_terms));
  Var lp = t.mean(t.concat(policy_terms));
  return t.neg(t.add(le, lp));
}

// fraction of steps classified correctly (expert as D > 1/2)
inline double disc_accuracy(ParamStore& s, const TupleMlp& f_net,
                            const std::vector<ExtTuple>& expert,
                            const std::vector<ExtTuple>& policy) {
  Tape t(&s);
  int correct = 0, total = 0;
  for (const auto& e : expert) {
    double f = t.val(f_net.forward(t, e.state, e.z, e.z_next, e.action_repr)).at(0);
    correct += disc_log_d(f, e.log_pi) > std::log(0.5) ? 1 : 0;
    ++total;
  }
  for (const auto& p : policy) {
    double f = t.val(f_net.forward(t, p.state, p.z, p.z_next, p.action_repr)).at(0);
    correct += disc_log_d(f, p.log_pi) <= std::log(0.5) ? 1 : 0;
    ++total;
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

// ---- H-GAIL ablation discriminator (Eq. a35 convention) ----
// expert labeled 0, generated labeled 1; policy reward is -log D

inline Var hgail_disc_loss(Tape& t, const TupleMlp& d_net,
                           const std::vector<ExtTuple>& expert,
                           const std::vector<ExtTuple>& policy) {
  if (expert.empty() || policy.empty())
    throw ArgumentError("hgail_disc_loss: empty batch");
  std::vector<Var> expert_terms, policy_terms;
  for (const auto& s : expert) {
    Var logit = d_net.forward(t, s.state, s.z, s.z_next, s.action_repr);
    // log(1 - D) = -softplus(logit)
    expert_terms.push_back(
        t.neg(t.logaddexp(logit, t.constant_scalar(0.0))));
  }
  for (const auto& s : policy) {
    Var logit = d_net.forward(t, s.state, s.z, s.z_next, s.action_repr);
    // log D = logit - softplus(logit)
    Var sp = t.logaddexp(logit, t.constant_scalar(0.0));
    policy_terms.push_back(t.sub(logit, sp));
  }
  Var le = t.mean(t.concat(expert_terms));
  Var lp = t.mean(t.concat(policy_terms));
  return t.neg(t.add(le, lp));
}

inline double hgail_reward(double logit) {
  // -log D with D = sigmoid(logit): softplus(-logit)
  double m = std::max(0.0, -logit);
  return m + std::log(std::exp(-m) + std::exp(-logit - m));
}

// ---- directed-information bound ----

// builds X_0..X_T posterior features for a trajectory
inline std::vector<Tensor> posterior_inputs(const RecurrentPosterior& post,
                                            const Trajectory& traj,
                                            bool discrete, int action_dim) {
  std::vector<Tensor> xs;
  xs.reserve(traj.states.size());
  std::vector<double> a_prev(post.config().action_dim, 0.0);  // dummy A_{-1}
  xs.push_back(post.x_features(a_prev, traj.states[0]));
  for (size_t t = 0; t < traj.actions.size(); ++t) {
    std::vector<double> ar = action_repr(traj.actions[t], discrete, action_dim);
    xs.push_back(post.x_features(ar, traj.states[t + 1]));
  }
  return xs;
}

// per-trajectory sum_t [ H(pi_theta(.|S_{t-1},Z_{t-1})) + log P_w(Z_t|X^t,Z^{t-1}) ]
inline double ldi_trajectory(ParamStore& s, const HierarchicalPolicy& policy,
                             const RecurrentPosterior& post,
                             const Trajectory& traj) {
  if (!traj.has_options) throw ArgumentError("ldi: trajectory lacks options");
  bool discrete = policy.config().discrete_actions;
  std::vector<Tensor> xs =
      posterior_inputs(post, traj, discrete, policy.config().action_dim);
  std::vector<double> lp = post.step_log_probs(s, xs, traj.options);
  double total = 0.0;
  Tape t(&s);
  for (int u = 0; u < traj.length(); ++u) {
    double ent =
        t.val(policy.high_entropy(t, Tensor::vec(traj.states[u]),
                                  traj.options[u]))
            .at(0);
    total += ent + lp[u];
  }
  return total;
}

// Monte-Carlo estimate of the bound: mean over trajectories sampled from the
// current hierarchical policy
inline double ldi_estimate(ParamStore& s, const HierarchicalPolicy& policy,
                           const RecurrentPosterior& post,
                           const std::vector<Trajectory>& batch) {
  if (batch.empty()) throw ArgumentError("ldi_estimate: empty batch");
  double total = 0.0;
  for (const auto& traj : batch) total += ldi_trajectory(s, policy, post, traj);
  return total / batch.size();
}

// posterior training objective: negated reconstruction term of the bound,
// averaged per trajectory
inline Var posterior_loss(Tape& t, const RecurrentPosterior& post,
                          const HierarchicalPolicy& policy,
                          const std::vector<Trajectory>& batch) {
  if (batch.empty()) throw ArgumentError("posterior_loss: empty batch");
  std::vector<Var> terms;
  bool discrete = policy.config().discrete_actions;
  for (const auto& traj : batch) {
    std::vector<Tensor> xs =
        posterior_inputs(post, traj, discrete, policy.config().action_dim);
    terms.push_back(post.sequence_log_prob(t, xs, traj.options));
  }
  return t.neg(t.mean(t.concat(terms)));
}

// ---- combined per-step return (Eq. 19 alignment) ----

struct ObjectiveWeights {
  double alpha_di = 0.01;
  double alpha_il = 1.0;
};

enum class ImitationKind { Airl, Gail };

struct RewardParts {
  std::vector<double> combined;   // per decision step
  std::vector<double> di;         // entropy + posterior log-prob part
  std::vector<double> il;         // imitation part (already clamped)
};

// The decision at env step u (state S_u, previous option Z_u, choice
// (Z_{u+1}, A_u), next state S_{u+1}) earns
//   alpha_di * [H(pi_theta(.|S_u,Z_u)) + log P_w(Z_{u+1}|X^{u+1},Z^u)]
// + alpha_il * R_IL(S_u, Z_u, Z_{u+1}, A_u).
inline RewardParts combined_return(ParamStore& s,
                                   const HierarchicalPolicy& policy,
                                   const RecurrentPosterior& post,
                                   const TupleMlp& disc, ImitationKind kind,
                                   const ObjectiveWeights& w,
                                   const Trajectory& traj,
                                   const std::vector<double>& logp_joint,
                                   double il_clamp = 20.0) {
  if (!traj.has_options)
    throw ArgumentError("combined_return: trajectory lacks options");
  if (static_cast<int>(logp_joint.size()) != traj.length())
    throw ArgumentError("combined_return: log-prob length mismatch");
  bool discrete = policy.config().discrete_actions;
  int adim = policy.config().action_dim;
  std::vector<Tensor> xs = posterior_inputs(post, traj, discrete, adim);
  std::vector<double> post_lp = post.step_log_probs(s, xs, traj.options);

  RewardParts parts;
  Tape t(&s);
  for (int u = 0; u < traj.length(); ++u) {
    Tensor state = Tensor::vec(traj.states[u]);
    double ent = t.val(policy.high_entropy(t, state, traj.options[u])).at(0);
    double di = ent + post_lp[u];
    Tensor ar = Tensor::vec(action_repr(traj.actions[u], discrete, adim));
    double il;
    double f = t.val(disc.forward(t, state, traj.options[u],
                                  traj.options[u + 1], ar))
                   .at(0);
    if (kind == ImitationKind::Airl) {
      il = reward_il(f, logp_joint[u]);
    } else {
      il = hgail_reward(f);
    }
    il = std::clamp(il, -il_clamp, il_clamp);
    parts.di.push_back(di);
    parts.il.push_back(il);
    parts.combined.push_back(w.alpha_di * di + w.alpha_il * il);
  }
  return parts;
}

}  // namespace hairl
