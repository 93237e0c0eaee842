#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hairl/experts.hpp"
#include "hairl/oracle.hpp"
#include "hairl/trainer.hpp"

using namespace hairl;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config(uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.num_options = 2;
  cfg.embed_dim = 3;
  cfg.attention_heads = 1;
  cfg.rollouts_per_episode = 3;
  cfg.episodes = 2;
  cfg.seed = seed;
  cfg.inner_steps_posterior = 1;
  cfg.inner_steps_discriminator = 1;
  cfg.policy_epochs = 2;
  cfg.policy_hidden = 8;
  cfg.posterior_hidden = 8;
  cfg.posterior_x_embed = 4;
  cfg.disc_hidden = 8;
  return cfg;
}

// fake expert demonstrations from rollouts of a separate random policy
DemoSet enum_demos(const std::string& env_id, int episodes, uint64_t seed,
                   bool keep_options) {
  auto env = make_env(env_id);
  PolicyConfig pc;
  pc.state_dim = env->state_dim();
  pc.num_options = 2;
  pc.embed_dim = 3;
  pc.heads = 1;
  pc.action_dim = env->action_dim();
  pc.discrete_actions = env->discrete_actions();
  pc.hidden = 6;
  HierarchicalPolicy pol(pc);
  ParamStore store;
  Rng rng(seed);
  pol.init_params(store, rng);
  DemoSet demos;
  demos.header.env = env_id;
  demos.header.state_dim = env->state_dim();
  demos.header.action_dim = env->action_dim();
  demos.header.discrete_actions = env->discrete_actions();
  demos.header.horizon = env->horizon();
  for (int e = 0; e < episodes; ++e) {
    Rng r = Rng(seed).spawn(100 + e);
    Rollout ro = rollout(*env, store, pol, env->horizon(), r);
    if (!keep_options) {
      ro.traj.options.clear();
      ro.traj.has_options = false;
    }
    demos.trajectories.push_back(ro.traj);
  }
  return demos;
}

std::string metrics_string(const std::vector<EpisodeMetrics>& rows) {
  std::ostringstream ss;
  write_metrics_header(ss, rows.empty() ? 0 : rows[0].option_usage.size());
  for (const auto& m : rows) write_metrics_row(ss, m);
  return ss.str();
}

}  // namespace

TEST_CASE("identical seed and config produce bit-identical runs") {
  auto run = [&]() {
    Trainer trainer(make_env("enum-chain2"), enum_demos("enum-chain2", 3, 5, true),
                    tiny_config(11));
    std::vector<EpisodeMetrics> rows;
    for (int e = 0; e < 2; ++e) rows.push_back(trainer.train_episode());
    auto path = fs::temp_directory_path() /
                ("hairl_det_" + std::to_string(rows.size()) + ".params");
    trainer.params().save(path.string());
    std::ifstream in(path);
    std::stringstream ckpt;
    ckpt << in.rdbuf();
    fs::remove(path);
    return metrics_string(rows) + "\n==\n" + ckpt.str();
  };
  CHECK(run() == run());
}

TEST_CASE("option-airl reward streams equal h-airl with alpha1 zero") {
  TrainConfig a = tiny_config(3);
  a.mode = Mode::HAirl;
  a.alpha1 = 0.0;
  TrainConfig b = tiny_config(3);
  b.mode = Mode::OptionAirl;
  b.alpha1 = 0.7;  // forced to zero by resolution
  CHECK(resolve_config(b).alpha1 == 0.0);

  Trainer ta(make_env("enum-chain2"), enum_demos("enum-chain2", 3, 5, true), a);
  Trainer tb(make_env("enum-chain2"), enum_demos("enum-chain2", 3, 5, true), b);
  EpisodeMetrics ma = ta.train_episode();
  EpisodeMetrics mb = tb.train_episode();
  CHECK(ma.env_return_mean == mb.env_return_mean);
  CHECK(ma.ldi == mb.ldi);
  CHECK(ma.disc_loss == mb.disc_loss);
}

TEST_CASE("h-gail changes only the imitation term, not the DI path") {
  TrainConfig a = tiny_config(7);
  a.mode = Mode::HAirl;
  TrainConfig b = tiny_config(7);
  b.mode = Mode::HGail;
  Trainer ta(make_env("enum-chain2"), enum_demos("enum-chain2", 3, 9, true), a);
  Trainer tb(make_env("enum-chain2"), enum_demos("enum-chain2", 3, 9, true), b);

  // identical seeds: policy and posterior parameters coincide before any
  // update, so DI parts on a shared trajectory are byte-identical while the
  // imitation parts come from different discriminators
  auto env = make_env("enum-chain2");
  Rng rng(1);
  Rollout ro = rollout(*env, ta.params(), ta.policy(), 2, rng);
  ObjectiveWeights w{1.0, 1.0};
  RewardParts pa = combined_return(ta.params(), ta.policy(), ta.posterior(),
                                   ta.discriminator(), ImitationKind::Airl, w,
                                   ro.traj, ro.logp_joint);
  RewardParts pb = combined_return(tb.params(), tb.policy(), tb.posterior(),
                                   tb.discriminator(), ImitationKind::Gail, w,
                                   ro.traj, ro.logp_joint);
  REQUIRE(pa.di.size() == pb.di.size());
  for (size_t i = 0; i < pa.di.size(); ++i) CHECK(pa.di[i] == pb.di[i]);

  // the first episode's DI estimate is computed before the policy diverges
  EpisodeMetrics ma = ta.train_episode();
  EpisodeMetrics mb = tb.train_episode();
  CHECK(ma.ldi == mb.ldi);
  CHECK(ma.env_return_mean == mb.env_return_mean);
}

TEST_CASE("provided annotations bypass the e-step verbatim") {
  DemoSet demos = enum_demos("enum-chain2", 3, 21, true);
  TrainConfig cfg = tiny_config(5);
  cfg.annotations_provided = true;
  Trainer trainer(make_env("enum-chain2"), demos, cfg);
  trainer.train_episode();
  REQUIRE(trainer.annotated_demos().size() == demos.trajectories.size());
  for (size_t i = 0; i < demos.trajectories.size(); ++i)
    CHECK(trainer.annotated_demos()[i].options == demos.trajectories[i].options);
}

TEST_CASE("inferred annotations appear after the e-step") {
  DemoSet demos = enum_demos("enum-chain2", 3, 23, false);
  CHECK(!demos.annotated());
  TrainConfig cfg = tiny_config(6);
  cfg.annotations_provided = false;
  Trainer trainer(make_env("enum-chain2"), demos, cfg);
  trainer.train_episode();
  REQUIRE(trainer.annotated_demos().size() == 3);
  for (const auto& t : trainer.annotated_demos()) {
    REQUIRE(t.has_options);
    CHECK(t.options[0] == 0);
    CHECK(t.options.size() == t.states.size());
  }
}

TEST_CASE("marking absent annotations as provided is rejected") {
  DemoSet demos = enum_demos("enum-chain2", 2, 25, false);
  TrainConfig cfg = tiny_config(6);
  cfg.annotations_provided = true;
  CHECK_THROWS_AS(Trainer(make_env("enum-chain2"), demos, cfg), ArgumentError);
}

TEST_CASE("empty demonstration sets are rejected") {
  DemoSet demos;
  demos.header.env = "enum-chain2";
  CHECK_THROWS_AS(Trainer(make_env("enum-chain2"), demos, tiny_config()),
                  ArgumentError);
}

TEST_CASE("non-finite parameters abort the episode with a numeric error") {
  Trainer trainer(make_env("enum-chain2"), enum_demos("enum-chain2", 2, 27, true),
                  tiny_config(8));
  trainer.params().value("posterior.head_b").at(0) =
      std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(trainer.train_episode(), NumericError);
}

TEST_CASE("bandit reward stream raises the probability of the good action") {
  // single state, two actions; reward favors action 1 at every step
  std::vector<double> mu = {1.0};
  std::vector<double> p = {1.0, 1.0};
  auto mdp = std::make_unique<EnumerableMdp>("bandit", 1, 2, 1, mu, p);

  DemoSet demos;
  demos.header.env = "enum-bandit";
  demos.header.state_dim = 1;
  demos.header.action_dim = 2;
  demos.header.discrete_actions = true;
  demos.header.horizon = 1;
  Trajectory d;
  d.states = {{1.0}, {1.0}};
  d.actions = {{1.0}};
  d.options = {0, 0};
  d.has_options = true;
  d.env_rewards = {0.0};
  demos.trajectories = {d};

  TrainConfig cfg = tiny_config(13);
  cfg.annotations_provided = true;
  cfg.rollouts_per_episode = 8;
  cfg.policy_epochs = 1;
  cfg.lr_policy = 5e-3;
  Trainer trainer(std::move(mdp), demos, cfg);

  auto prob_good = [&]() {
    Tape t(&trainer.params());
    const Tensor& lp = t.val(trainer.policy().low_log_probs_discrete(
        t, Tensor::vec({1.0}), 0));
    double p0 = std::exp(lp.at(0)), p1 = std::exp(lp.at(1));
    return p1 / (p0 + p1);
  };

  double before = prob_good();
  std::vector<double> checkpoints;
  auto env = make_env("enum-chain2");  // unused; rollouts below use the mdp
  for (int update = 0; update < 50; ++update) {
    std::vector<Rollout> rollouts;
    std::vector<std::vector<double>> rewards;
    for (int i = 0; i < 8; ++i) {
      auto bandit = EnumerableMdp("bandit", 1, 2, 1, {1.0}, {1.0, 1.0});
      Rng rng = Rng(777).spawn(update * 8 + i);
      Rollout ro = rollout(bandit, trainer.params(), trainer.policy(), 1, rng);
      std::vector<double> r(ro.traj.length());
      for (int u = 0; u < ro.traj.length(); ++u)
        r[u] = ro.traj.actions[u][0] > 0.5 ? 1.0 : 0.0;
      rollouts.push_back(std::move(ro));
      rewards.push_back(std::move(r));
    }
    trainer.policy_update(rollouts, rewards);
    if ((update + 1) % 10 == 0) checkpoints.push_back(prob_good());
  }
  // monotone trend across update blocks and a clear overall rise
  for (size_t i = 1; i < checkpoints.size(); ++i)
    CHECK(checkpoints[i] >= checkpoints[i - 1] - 0.02);
  CHECK(checkpoints.back() > before + 0.25);
  CHECK(checkpoints.back() > 0.75);
}

TEST_CASE("surrogate gradient matches finite differences on a frozen batch") {
  Trainer trainer(make_env("enum-chain2"), enum_demos("enum-chain2", 2, 31, true),
                  tiny_config(17));
  auto env = make_env("enum-chain2");
  std::vector<Rollout> rollouts;
  std::vector<std::vector<double>> advs;
  Rng rng(4242);
  for (int i = 0; i < 3; ++i) {
    Rollout ro = rollout(*env, trainer.params(), trainer.policy(), 2, rng);
    std::vector<double> a(ro.traj.length());
    for (double& v : a) v = rng.uniform(-1, 1);
    advs.push_back(a);
    rollouts.push_back(std::move(ro));
  }
  ParamStore& s = trainer.params();
  const HierarchicalPolicy& pol = trainer.policy();
  double clip = trainer.config().clip_ratio;
  auto loss = [&]() {
    s.zero_grads();
    Tape t(&s);
    std::vector<Var> terms;
    for (size_t r = 0; r < rollouts.size(); ++r) {
      const Trajectory& traj = rollouts[r].traj;
      for (int u = 0; u < traj.length(); ++u) {
        Var lp = pol.joint_log_prob(t, Tensor::vec(traj.states[u]),
                                    traj.options[u], traj.options[u + 1],
                                    Tensor::vec(traj.actions[u]));
        Var ratio = t.exp_(t.add_scalar(lp, -rollouts[r].logp_joint[u]));
        Var s1 = t.scale(ratio, advs[r][u]);
        Var s2 = t.scale(t.clamp(ratio, 1.0 - clip, 1.0 + clip), advs[r][u]);
        terms.push_back(t.minimum(s1, s2));
      }
    }
    Var l = t.neg(t.mean(t.concat(terms)));
    t.backward(l);
    return t.val(l).at(0);
  };
  CHECK(grad_check(loss, s, 1e-5, 250) < 1e-4);
}

TEST_CASE("zero advantages leave the surrogate gradient at zero") {
  Trainer trainer(make_env("enum-chain2"), enum_demos("enum-chain2", 2, 33, true),
                  tiny_config(19));
  auto env = make_env("enum-chain2");
  Rng rng(5);
  std::vector<Rollout> rollouts;
  std::vector<std::vector<double>> rewards;
  Rollout ro = rollout(*env, trainer.params(), trainer.policy(), 2, rng);
  rewards.push_back(std::vector<double>(ro.traj.length(), 0.0));
  rollouts.push_back(std::move(ro));
  // zero rewards with a fresh zero value head give zero advantages everywhere;
  // normalization is skipped and the surrogate term moves nothing
  for (const auto& name : trainer.params().names())
    if (name.rfind("value.", 0) == 0) trainer.params().value(name).fill(0.0);
  ParamStore before;
  Rng dummy(1);
  trainer.policy().init_params(before, dummy);
  for (const auto& name : before.names())
    before.value(name).data = trainer.params().value(name).data;
  trainer.policy_update(rollouts, rewards);
  for (const auto& name : before.names())
    CHECK(trainer.params().value(name).data == before.value(name).data);
}

TEST_CASE("transfer init copies skills and rejects mismatched shapes") {
  TrainConfig cfg = tiny_config(23);
  Trainer source(make_env("enum-chain2"), enum_demos("enum-chain2", 2, 35, true),
                 cfg);
  source.train_episode();

  TrainConfig cfg2 = tiny_config(29);
  cfg2.seed = 99;
  Trainer target(make_env("enum-chain2"), enum_demos("enum-chain2", 2, 37, true),
                 cfg2);
  transfer_init(source.params(), target.params());

  // low-level outputs identical after initialization
  Tensor state = Tensor::vec({1.0, 0.0});
  for (int z = 0; z < 2; ++z) {
    Tape ts(&source.params()), tt(&target.params());
    const Tensor& a = ts.val(source.policy().low_log_probs_discrete(ts, state, z));
    const Tensor& b = tt.val(target.policy().low_log_probs_discrete(tt, state, z));
    for (int i = 0; i < a.numel(); ++i) CHECK(a.at(i) == b.at(i));
  }
  // high-level weights stay freshly initialized (seeds differ)
  CHECK(source.params().value("policy.hi.in_w").data !=
        target.params().value("policy.hi.in_w").data);

  // mismatched option count
  TrainConfig cfg3 = tiny_config(31);
  cfg3.num_options = 3;
  Trainer bigger(make_env("enum-chain2"), enum_demos("enum-chain2", 2, 39, true),
                 cfg3);
  CHECK_THROWS_AS(transfer_init(source.params(), bigger.params()),
                  ArgumentError);
}

TEST_CASE("imitation reward expectation obeys the oracle KL identity") {
  auto env = make_env("enum-chain2");
  auto* mdp = dynamic_cast<EnumerableMdp*>(env.get());
  Trainer trainer(make_env("enum-chain2"), enum_demos("enum-chain2", 3, 41, true),
                  tiny_config(37));
  for (int e = 0; e < 2; ++e) trainer.train_episode();

  // tabulate the trained networks
  oracle::TabularPolicy pol =
      oracle::tabulate_policy(trainer.params(), trainer.policy(), *mdp);
  oracle::FTable f = oracle::FTable::zeros(2, 2, 2);
  {
    Tape t(&trainer.params());
    for (int s = 0; s < 2; ++s)
      for (int z = 0; z < 2; ++z)
        for (int zn = 0; zn < 2; ++zn)
          for (int a = 0; a < 2; ++a) {
            Tensor ar = Tensor::vec(action_repr({double(a)}, true, 2));
            f.at(s, z, zn, a) =
                t.val(trainer.discriminator().forward(
                          t, Tensor::vec(mdp->features(s)), z, zn, ar))
                    .at(0);
          }
  }
  oracle::KlEquivalence kq = oracle::kl_equivalence_check(*mdp, f, pol);
  CHECK(std::abs(kq.lhs - kq.rhs) < 1e-9);

  // lhs is the exact expectation of the per-step imitation reward
  oracle::JointTable table = oracle::joint_distribution(*mdp, pol);
  double mean_reward = 0.0;
  for (const auto& entry : table.entries) {
    double sum = 0.0;
    for (int t = 0; t < table.T; ++t) {
      double log_pi =
          std::log(pol.high(entry.states[t], entry.options[t],
                            entry.options[t + 1])) +
          std::log(pol.low(entry.states[t], entry.options[t + 1],
                           entry.actions[t]));
      sum += reward_il(f(entry.states[t], entry.options[t],
                         entry.options[t + 1], entry.actions[t]),
                       log_pi);
    }
    mean_reward += entry.prob * sum;
  }
  CHECK(mean_reward == doctest::Approx(kq.lhs).epsilon(1e-9));
}

TEST_CASE("metrics stream carries the frozen schema") {
  Trainer trainer(make_env("enum-chain2"), enum_demos("enum-chain2", 2, 43, true),
                  tiny_config(41));
  std::ostringstream csv;
  TrainConfig cfg = trainer.config();
  std::vector<EpisodeMetrics> rows;
  rows.push_back(trainer.train_episode());
  write_metrics_header(csv, cfg.num_options);
  write_metrics_row(csv, rows[0]);
  std::string line;
  std::istringstream in(csv.str());
  std::getline(in, line);
  CHECK(line ==
        "episode,env_return_mean,env_return_std,ldi,disc_loss,disc_acc,"
        "option_usage_0,option_usage_1");
  std::getline(in, line);
  CHECK(line.rfind("0,", 0) == 0);
  double usage = rows[0].option_usage[0] + rows[0].option_usage[1];
  CHECK(usage == doctest::Approx(1.0).epsilon(1e-12));
}
