// Full training loop: rollout generation, E-step annotation of expert data,
// posterior / discriminator / policy updates on a clipped-surrogate policy
// gradient over the extended MDP, and the ablation modes.
#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "hairl/core.hpp"
#include "hairl/envs.hpp"
#include "hairl/objectives.hpp"
#include "hairl/option_policy.hpp"
#include "hairl/param_store.hpp"
#include "hairl/posterior.hpp"
#include "hairl/rollout.hpp"
#include "hairl/tape.hpp"

namespace hairl {

enum class Mode { HAirl, OptionAirl, HGail };

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::HAirl: return "h-airl";
    case Mode::OptionAirl: return "option-airl";
    case Mode::HGail: return "h-gail";
  }
  return "h-airl";
}

inline Mode mode_from_name(const std::string& s) {
  if (s == "h-airl") return Mode::HAirl;
  if (s == "option-airl") return Mode::OptionAirl;
  if (s == "h-gail") return Mode::HGail;
  throw ArgumentError("unknown mode: " + s);
}

struct TrainConfig {
  int num_options = 2;
  int embed_dim = 8;
  int attention_heads = 2;
  int horizon = 0;  // 0 = environment default
  int rollouts_per_episode = 12;
  int episodes = 500;
  double alpha1 = 0.01;  // directed-information weight
  double alpha2 = 1.0;   // imitation weight
  // episode window (as fractions of the run) in which the directed-info
  // term is active. Starting after an imitation-only phase separates options
  // by tie-breaking instead of fighting early imitation learning; ending
  // before the run closes lets the option-conditioned discriminator maintain
  // the separation while usage rebalances.
  double alpha1_warmup_frac = 0.0;
  double alpha1_cutoff_frac = 1.0;
  double lr_policy = 3e-3;
  double lr_posterior = 1e-3;
  double lr_discriminator = 3e-3;
  double clip_ratio = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  uint64_t seed = 1;
  Mode mode = Mode::HAirl;
  bool annotations_provided = false;
  int inner_steps_posterior = 5;
  int inner_steps_discriminator = 2;
  int em_every = 10;
  int policy_epochs = 4;
  bool anneal_lr = true;  // linear policy learning-rate decay over episodes
  int workers = 1;
  int policy_hidden = 64;
  int posterior_hidden = 64;
  int posterior_x_embed = 16;
  int disc_hidden = 64;
  double il_clamp = 20.0;
};

// mode-specific constraints; returns the configuration actually trained with
inline TrainConfig resolve_config(TrainConfig cfg) {
  if (cfg.num_options < 1 || cfg.episodes < 0 ||
      cfg.rollouts_per_episode < 1)
    throw ArgumentError("train config: N, M and episodes must be positive");
  if (cfg.alpha2 <= 0.0) throw ArgumentError("train config: alpha2 must be > 0");
  if (cfg.mode == Mode::OptionAirl) cfg.alpha1 = 0.0;
  return cfg;
}

struct EpisodeMetrics {
  int episode = 0;
  double env_return_mean = 0.0;
  double env_return_std = 0.0;
  double ldi = 0.0;
  double disc_loss = 0.0;
  double disc_acc = 0.0;
  std::vector<double> option_usage;
};

inline void write_metrics_header(std::ostream& out, int num_options) {
  out << "episode,env_return_mean,env_return_std,ldi,disc_loss,disc_acc";
  for (int i = 0; i < num_options; ++i) out << ",option_usage_" << i;
  out << "\n";
}

inline void write_metrics_row(std::ostream& out, const EpisodeMetrics& m) {
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << "," << buf;
  };
  out << m.episode;
  put(m.env_return_mean);
  put(m.env_return_std);
  put(m.ldi);
  put(m.disc_loss);
  put(m.disc_acc);
  for (double v : m.option_usage) put(v);
  out << "\n";
}

// copies the low-level policy and the shared option-context matrix from a
// source checkpoint; everything else keeps its fresh initialization
inline void transfer_init(const ParamStore& source, ParamStore& target) {
  bool found = false;
  for (const auto& n : source.names())
    if (n.rfind("policy.lo.", 0) == 0 || n == "policy.wc") found = true;
  if (!found) throw ArgumentError("transfer_init: source has no skill parameters");
  target.copy_from(source, "policy.lo.");
  target.copy_from(source, "policy.wc");
}

class Trainer {
 public:
  Trainer(std::unique_ptr<Env> env, DemoSet demos, TrainConfig cfg,
          std::ostream* log = nullptr)
      : env_(std::move(env)),
        demos_(std::move(demos)),
        cfg_(resolve_config(cfg)),
        log_(log) {
    if (demos_.trajectories.empty())
      throw ArgumentError("trainer: empty demonstration set");
    if (cfg_.annotations_provided && !demos_.annotated())
      throw ArgumentError(
          "trainer: annotations marked provided but demos lack options");
    horizon_ = cfg_.horizon > 0 ? cfg_.horizon : env_->horizon();

    PolicyConfig pc;
    pc.state_dim = env_->state_dim();
    pc.num_options = cfg_.num_options;
    pc.embed_dim = cfg_.embed_dim;
    pc.heads = cfg_.attention_heads;
    pc.action_dim = env_->action_dim();
    pc.discrete_actions = env_->discrete_actions();
    pc.hidden = cfg_.policy_hidden;
    policy_ = HierarchicalPolicy(pc, "policy.");

    PosteriorConfig qc;
    qc.state_dim = env_->state_dim();
    qc.action_dim = env_->action_dim();  // one-hot size for discrete
    qc.num_options = cfg_.num_options;
    qc.x_embed = cfg_.posterior_x_embed;
    qc.hidden = cfg_.posterior_hidden;
    posterior_ = RecurrentPosterior(qc, "posterior.");

    DiscConfig dc;
    dc.state_dim = env_->state_dim();
    dc.num_options = cfg_.num_options;
    dc.action_repr_dim = env_->action_dim();
    dc.hidden = cfg_.disc_hidden;
    disc_ = TupleMlp(dc, cfg_.mode == Mode::HGail ? "gail." : "disc.");

    Rng init_rng(cfg_.seed);
    policy_.init_params(store_, init_rng);
    posterior_.init_params(store_, init_rng);
    disc_.init_params(store_, init_rng);
    init_value_params(init_rng);

    opt_policy_.emplace(store_, "policy.", cfg_.lr_policy);
    opt_value_.emplace(store_, "value.", cfg_.lr_policy);
    opt_posterior_.emplace(store_, "posterior.", cfg_.lr_posterior);
    opt_disc_.emplace(store_, disc_.prefix(), cfg_.lr_discriminator);

    if (cfg_.workers > 1) {
      for (int w = 0; w < cfg_.workers; ++w)
        worker_envs_.push_back(make_env(env_->id()));
    }
    if (cfg_.annotations_provided) annotated_ = demos_.trajectories;
  }

  const TrainConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const HierarchicalPolicy& policy() const { return policy_; }
  const RecurrentPosterior& posterior() const { return posterior_; }
  const TupleMlp& discriminator() const { return disc_; }
  Env& env() { return *env_; }
  int horizon() const { return horizon_; }
  const std::vector<Trajectory>& annotated_demos() const { return annotated_; }

  // one iteration of the training loop
  EpisodeMetrics train_episode() {
    if (cfg_.anneal_lr && cfg_.episodes > 0) {
      // full rate through the first half, then a linear ramp down; the
      // policy and discriminator decay together to keep the adversarial
      // balance while damping late oscillation
      double frac = static_cast<double>(episode_) / cfg_.episodes;
      double scale = frac <= 0.5 ? 1.0
                                 : std::max(0.1, 1.0 - 1.8 * (frac - 0.5));
      opt_policy_->set_learning_rate(cfg_.lr_policy * scale);
      opt_value_->set_learning_rate(cfg_.lr_policy * scale);
      opt_disc_->set_learning_rate(cfg_.lr_discriminator * scale);
    }

    // (a) generate rollouts
    std::vector<Rollout> rollouts = generate_rollouts();

    // (b) E-step: annotate expert trajectories from the posterior snapshot
    if (!cfg_.annotations_provided &&
        (episode_ % cfg_.em_every == 0 || annotated_.empty()))
      e_step();

    // (c) posterior update on generated rollouts
    std::vector<Trajectory> batch;
    for (auto& r : rollouts) batch.push_back(r.traj);
    double post_loss = 0.0;
    for (int it = 0; it < cfg_.inner_steps_posterior; ++it) {
      store_.zero_grads();
      Tape t(&store_);
      Var loss = posterior_loss(t, posterior_, policy_, batch);
      post_loss = t.val(loss).at(0);
      check_finite(post_loss, "posterior loss");
      t.backward(loss);
      opt_posterior_->step();
    }
    (void)post_loss;

    // (d) discriminator update on generated vs expert batches
    std::vector<ExtTuple> expert_tuples = tuples_from(annotated_);
    std::vector<ExtTuple> policy_tuples;
    for (const auto& r : rollouts) {
      auto tu = tuples_from_one(r.traj, &r.logp_joint);
      policy_tuples.insert(policy_tuples.end(), tu.begin(), tu.end());
    }
    EpisodeMetrics m;
    m.episode = episode_;
    for (int it = 0; it < cfg_.inner_steps_discriminator; ++it) {
      store_.zero_grads();
      Tape t(&store_);
      Var loss = cfg_.mode == Mode::HGail
                     ? hgail_disc_loss(t, disc_, expert_tuples, policy_tuples)
                     : disc_loss(t, disc_, expert_tuples, policy_tuples);
      m.disc_loss = t.val(loss).at(0);
      check_finite(m.disc_loss, "discriminator loss");
      t.backward(loss);
      opt_disc_->step();
    }
    m.disc_acc = cfg_.mode == Mode::HGail
                     ? hgail_accuracy(expert_tuples, policy_tuples)
                     : disc_accuracy(store_, disc_, expert_tuples, policy_tuples);

    // (e) policy update with the combined return
    double alpha1_now = cfg_.alpha1;
    if (cfg_.episodes > 0) {
      double frac = static_cast<double>(episode_) / cfg_.episodes;
      if (frac < cfg_.alpha1_warmup_frac || frac >= cfg_.alpha1_cutoff_frac)
        alpha1_now = 0.0;
    }
    ObjectiveWeights w{alpha1_now, cfg_.alpha2};
    ImitationKind kind = cfg_.mode == Mode::HGail ? ImitationKind::Gail
                                                  : ImitationKind::Airl;
    double ldi_sum = 0.0;
    std::vector<std::vector<double>> rewards;
    for (const auto& r : rollouts) {
      RewardParts parts = combined_return(store_, policy_, posterior_, disc_,
                                          kind, w, r.traj, r.logp_joint,
                                          cfg_.il_clamp);
      double di = 0.0;
      for (double v : parts.di) di += v;
      ldi_sum += di;
      rewards.push_back(std::move(parts.combined));
    }
    m.ldi = ldi_sum / rollouts.size();
    run_policy_update(rollouts, rewards);

    // metrics
    double mean = 0.0;
    for (const auto& r : rollouts) mean += r.traj.env_return();
    mean /= rollouts.size();
    double var = 0.0;
    for (const auto& r : rollouts) {
      double d = r.traj.env_return() - mean;
      var += d * d;
    }
    m.env_return_mean = mean;
    m.env_return_std =
        rollouts.size() > 1 ? std::sqrt(var / (rollouts.size() - 1)) : 0.0;
    m.option_usage.assign(cfg_.num_options, 0.0);
    int steps = 0;
    for (const auto& r : rollouts)
      for (int u = 0; u < r.traj.length(); ++u, ++steps)
        m.option_usage[r.traj.options[u + 1]] += 1.0;
    for (double& v : m.option_usage) v /= std::max(1, steps);
    ++episode_;
    return m;
  }

  std::vector<EpisodeMetrics> run(std::ostream* csv,
                                  const std::string& out_dir = "",
                                  int checkpoint_interval = 0) {
    if (csv) write_metrics_header(*csv, cfg_.num_options);
    std::vector<EpisodeMetrics> all;
    for (int ep = 0; ep < cfg_.episodes; ++ep) {
      EpisodeMetrics m = train_episode();
      if (csv) write_metrics_row(*csv, m);
      all.push_back(std::move(m));
      if (!out_dir.empty() && checkpoint_interval > 0 &&
          (ep + 1) % checkpoint_interval == 0)
        store_.save(out_dir + "/checkpoint_ep" + std::to_string(ep + 1) +
                    ".params");
    }
    if (!out_dir.empty())
      store_.save(out_dir + "/checkpoint_final.params");
    return all;
  }

  // mean episodic environment return under the current policy
  double evaluate(int episodes, uint64_t eval_seed, double* std_out = nullptr) {
    Rng rng = Rng(cfg_.seed).spawn(0xe7a1 + eval_seed);
    return evaluate_policy(*env_, store_, policy_, episodes, rng, std_out);
  }

  // clipped-surrogate update from explicit reward streams; also used by the
  // per-episode loop
  void policy_update(const std::vector<Rollout>& rollouts,
                     const std::vector<std::vector<double>>& rewards) {
    run_policy_update(rollouts, rewards);
  }

  // average energy of the annotated expert set under the current f network;
  // the tractable part of the EM lower bound logged at E-step time
  double expert_energy_mean() {
    if (annotated_.empty()) return 0.0;
    Tape t(&store_);
    double total = 0.0;
    int count = 0;
    for (const auto& traj : annotated_) {
      for (int u = 0; u < traj.length(); ++u) {
        Tensor ar = Tensor::vec(action_repr(traj.actions[u],
                                            env_->discrete_actions(),
                                            env_->action_dim()));
        total += t.val(disc_.forward(t, Tensor::vec(traj.states[u]),
                                     traj.options[u], traj.options[u + 1], ar))
                     .at(0);
        ++count;
      }
    }
    return count ? total / count : 0.0;
  }

 private:
  void init_value_params(Rng& rng) {
    int in = env_->state_dim() + cfg_.num_options;
    store_.add("value.w0", init_linear_weight(in, cfg_.policy_hidden, rng));
    store_.add("value.b0", Tensor::zeros({cfg_.policy_hidden}));
    store_.add("value.w1",
               init_linear_weight(cfg_.policy_hidden, cfg_.policy_hidden, rng));
    store_.add("value.b1", Tensor::zeros({cfg_.policy_hidden}));
    store_.add("value.w2", init_linear_weight(cfg_.policy_hidden, 1, rng));
    store_.add("value.b2", Tensor::zeros({1}));
  }

  // value of the extended state (S, Z)
  Var value_of(Tape& t, const Tensor& state, int z) const {
    Var x = t.concat(
        {t.constant(state), t.constant(one_hot(cfg_.num_options, z))});
    Var h0 = t.tanh_(t.linear(x, t.param("value.w0"), t.param("value.b0")));
    Var h1 = t.tanh_(t.linear(h0, t.param("value.w1"), t.param("value.b1")));
    return t.pick(t.linear(h1, t.param("value.w2"), t.param("value.b2")), 0);
  }

  std::vector<Rollout> generate_rollouts() {
    int m = cfg_.rollouts_per_episode;
    std::vector<Rollout> out(m);
    auto one = [&](Env& env, int i) {
      Rng rng = Rng(cfg_.seed).spawn(
          1 + static_cast<uint64_t>(episode_) * m + i);
      out[i] = rollout(env, store_, policy_, horizon_, rng);
    };
    if (cfg_.workers <= 1) {
      for (int i = 0; i < m; ++i) one(*env_, i);
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < cfg_.workers; ++w)
        threads.emplace_back([&, w]() {
          for (int i = w; i < m; i += cfg_.workers) one(*worker_envs_[w], i);
        });
      for (auto& th : threads) th.join();
    }
    return out;
  }

  void e_step() {
    // snapshot of the posterior parameters at E-step time
    omega_bar_ = store_;
    annotated_.clear();
    Rng rng = Rng(cfg_.seed).spawn(0x5eed + static_cast<uint64_t>(episode_));
    bool discrete = env_->discrete_actions();
    for (const auto& demo : demos_.trajectories) {
      Trajectory t = demo;
      std::vector<Tensor> xs =
          posterior_inputs(posterior_, t, discrete, env_->action_dim());
      t.options = posterior_.e_step_sample(*omega_bar_, xs, rng);
      t.has_options = true;
      annotated_.push_back(std::move(t));
    }
    if (log_)
      (*log_) << "e-step at episode " << episode_
              << ": expert energy mean " << expert_energy_mean() << "\n";
  }

  std::vector<ExtTuple> tuples_from_one(const Trajectory& traj,
                                        const std::vector<double>* logp) {
    std::vector<ExtTuple> out;
    bool discrete = env_->discrete_actions();
    Tape t(&store_);
    for (int u = 0; u < traj.length(); ++u) {
      ExtTuple e;
      e.state = Tensor::vec(traj.states[u]);
      e.z = traj.options[u];
      e.z_next = traj.options[u + 1];
      e.action = Tensor::vec(traj.actions[u]);
      e.action_repr = Tensor::vec(
          action_repr(traj.actions[u], discrete, env_->action_dim()));
      e.log_pi = logp ? (*logp)[u]
                      : t.val(policy_.joint_log_prob(t, e.state, e.z, e.z_next,
                                                     e.action))
                            .at(0);
      out.push_back(std::move(e));
    }
    return out;
  }

  // policy density evaluated fresh under the current parameters
  std::vector<ExtTuple> tuples_from(const std::vector<Trajectory>& trajs) {
    std::vector<ExtTuple> out;
    for (const auto& traj : trajs) {
      auto tu = tuples_from_one(traj, nullptr);
      out.insert(out.end(), tu.begin(), tu.end());
    }
    return out;
  }

  double hgail_accuracy(const std::vector<ExtTuple>& expert,
                        const std::vector<ExtTuple>& policy) {
    Tape t(&store_);
    int correct = 0, total = 0;
    for (const auto& e : expert) {
      double logit =
          t.val(disc_.forward(t, e.state, e.z, e.z_next, e.action_repr)).at(0);
      correct += logit <= 0.0 ? 1 : 0;  // expert labeled 0
      ++total;
    }
    for (const auto& p : policy) {
      double logit =
          t.val(disc_.forward(t, p.state, p.z, p.z_next, p.action_repr)).at(0);
      correct += logit > 0.0 ? 1 : 0;
      ++total;
    }
    return total ? static_cast<double>(correct) / total : 0.0;
  }

  void run_policy_update(const std::vector<Rollout>& rollouts,
                         const std::vector<std::vector<double>>& rewards) {
    // values and advantage estimation (no gradients)
    std::vector<std::vector<double>> advs(rollouts.size());
    std::vector<std::vector<double>> returns(rollouts.size());
    {
      Tape t(&store_);
      for (size_t r = 0; r < rollouts.size(); ++r) {
        const Trajectory& traj = rollouts[r].traj;
        int len = traj.length();
        std::vector<double> values(len + 1, 0.0);
        for (int u = 0; u < len; ++u)
          values[u] = t.val(value_of(t, Tensor::vec(traj.states[u]),
                                     traj.options[u]))
                          .at(0);
        values[len] =
            traj.terminal
                ? 0.0
                : t.val(value_of(t, Tensor::vec(traj.states[len]),
                                 traj.options[len]))
                      .at(0);
        advs[r].assign(len, 0.0);
        returns[r].assign(len, 0.0);
        double gae = 0.0, ret = values[len];
        for (int u = len - 1; u >= 0; --u) {
          double delta = rewards[r][u] + cfg_.discount * values[u + 1] -
                         values[u];
          gae = delta + cfg_.discount * cfg_.gae_lambda * gae;
          advs[r][u] = gae;
          ret = rewards[r][u] + cfg_.discount * ret;
          returns[r][u] = ret;
        }
      }
    }
    // normalize advantages across the whole batch; skip when degenerate
    double mean = 0.0;
    int count = 0;
    for (const auto& a : advs)
      for (double v : a) {
        mean += v;
        ++count;
      }
    mean /= std::max(1, count);
    double var = 0.0;
    for (const auto& a : advs)
      for (double v : a) var += (v - mean) * (v - mean);
    double sd = count > 1 ? std::sqrt(var / (count - 1)) : 0.0;
    if (sd > 1e-12)
      for (auto& a : advs)
        for (double& v : a) v = (v - mean) / sd;

    for (int epoch = 0; epoch < cfg_.policy_epochs; ++epoch) {
      // clipped surrogate on the extended MDP
      store_.zero_grads();
      Tape t(&store_);
      std::vector<Var> terms;
      for (size_t r = 0; r < rollouts.size(); ++r) {
        const Trajectory& traj = rollouts[r].traj;
        for (int u = 0; u < traj.length(); ++u) {
          Var lp = policy_.joint_log_prob(t, Tensor::vec(traj.states[u]),
                                          traj.options[u], traj.options[u + 1],
                                          Tensor::vec(traj.actions[u]));
          Var ratio =
              t.exp_(t.add_scalar(lp, -rollouts[r].logp_joint[u]));
          Var surr1 = t.scale(ratio, advs[r][u]);
          Var surr2 = t.scale(
              t.clamp(ratio, 1.0 - cfg_.clip_ratio, 1.0 + cfg_.clip_ratio),
              advs[r][u]);
          terms.push_back(t.minimum(surr1, surr2));
        }
      }
      Var loss = t.neg(t.mean(t.concat(terms)));
      check_finite(t.val(loss).at(0), "policy surrogate");
      t.backward(loss);
      opt_policy_->step();

      // value regression toward empirical returns
      store_.zero_grads();
      Tape tv(&store_);
      std::vector<Var> verr;
      for (size_t r = 0; r < rollouts.size(); ++r) {
        const Trajectory& traj = rollouts[r].traj;
        for (int u = 0; u < traj.length(); ++u) {
          Var v = value_of(tv, Tensor::vec(traj.states[u]), traj.options[u]);
          Var diff = tv.add_scalar(v, -returns[r][u]);
          verr.push_back(tv.mul(diff, diff));
        }
      }
      Var vloss = tv.mean(tv.concat(verr));
      check_finite(tv.val(vloss).at(0), "value loss");
      tv.backward(vloss);
      opt_value_->step();
    }
  }

  static void check_finite(double v, const char* what) {
    if (!std::isfinite(v))
      throw NumericError(std::string("non-finite ") + what +
                         "; aborting episode");
  }

  std::unique_ptr<Env> env_;
  std::vector<std::unique_ptr<Env>> worker_envs_;
  DemoSet demos_;
  TrainConfig cfg_;
  std::ostream* log_;
  int horizon_ = 0;
  int episode_ = 0;

  ParamStore store_;
  HierarchicalPolicy policy_;
  RecurrentPosterior posterior_;
  TupleMlp disc_;
  std::optional<ParamStore> omega_bar_;
  std::vector<Trajectory> annotated_;

  std::optional<Adam> opt_policy_, opt_value_, opt_posterior_, opt_disc_;
};

}  // namespace hairl
