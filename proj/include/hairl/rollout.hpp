// Trajectory generation with the hierarchical policy: at every step the next
// option is drawn from the high-level policy and the action from the
// low-level policy conditioned on it.
#pragma once

#include <vector>

#include "hairl/envs.hpp"
#include "hairl/option_policy.hpp"

namespace hairl {

struct Rollout {
  Trajectory traj;
  std::vector<double> logp_joint;  // behavior log pi(Z_{t+1}, A_t | S_t, Z_t)
};

inline std::vector<double> action_one_hot(const Tensor& action, int n) {
  std::vector<double> v(n, 0.0);
  v[static_cast<int>(action.at(0))] = 1.0;
  return v;
}

// representation of an action as network input: one-hot for discrete
// actions, the raw vector otherwise
inline std::vector<double> action_repr(const std::vector<double>& action,
                                       bool discrete, int action_dim) {
  if (!discrete) return action;
  std::vector<double> v(action_dim, 0.0);
  v[static_cast<int>(action.at(0))] = 1.0;
  return v;
}

inline Rollout rollout(Env& env, ParamStore& store,
                       const HierarchicalPolicy& policy, int horizon,
                       Rng& rng) {
  Rollout out;
  Trajectory& traj = out.traj;
  traj.has_options = true;
  std::vector<double> state = env.reset(rng);
  traj.states.push_back(state);
  traj.options.push_back(0);  // dummy Z_0
  int z = 0;
  for (int t = 0; t < horizon; ++t) {
    Tensor s = Tensor::vec(state);
    double lp_hi = 0.0, lp_lo = 0.0;
    int z_next = policy.sample_option(store, s, z, rng, &lp_hi);
    Tensor action = policy.sample_action(store, s, z_next, rng, &lp_lo);
    StepResult res = env.step(action.data, rng);
    traj.actions.push_back(action.data);
    traj.options.push_back(z_next);
    traj.env_rewards.push_back(res.reward);
    traj.states.push_back(res.state);
    out.logp_joint.push_back(lp_hi + lp_lo);
    state = res.state;
    z = z_next;
    if (res.done) {
      traj.terminal = true;
      break;
    }
  }
  return out;
}

// mean episodic environment return of the current policy, sampling actions
inline double evaluate_policy(Env& env, ParamStore& store,
                              const HierarchicalPolicy& policy, int episodes,
                              Rng& rng, double* std_out = nullptr) {
  std::vector<double> returns;
  for (int e = 0; e < episodes; ++e) {
    Rollout r = rollout(env, store, policy, env.horizon(), rng);
    returns.push_back(r.traj.env_return());
  }
  double mean = 0.0;
  for (double v : returns) mean += v;
  mean /= returns.size();
  if (std_out) {
    double var = 0.0;
    for (double v : returns) var += (v - mean) * (v - mean);
    *std_out = returns.size() > 1 ? std::sqrt(var / (returns.size() - 1)) : 0.0;
  }
  return mean;
}

}  // namespace hairl
