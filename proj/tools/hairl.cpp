// Command-line entry point: expert generation, training, evaluation, oracle
// verification, and metric export.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hairl/config.hpp"
#include "hairl/experts.hpp"
#include "hairl/oracle.hpp"
#include "hairl/trainer.hpp"

namespace fs = std::filesystem;
using namespace hairl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitCheck = 3;

int cmd_gen_expert(const std::string& env_id, int task, int episodes,
                   uint64_t seed, const std::string& out, bool annotate) {
  std::string id = env_id;
  if (task > 0 && id.find("-t") == std::string::npos)
    id += "-t" + std::to_string(task);
  auto env = make_env(id);
  DemoSet demos = generate_demos(*env, episodes, seed, annotate);
  write_demos(demos, out);
  std::cout << "wrote " << demos.trajectories.size() << " demos to " << out
            << " (expert return " << demos.header.expert_return << ")\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& demos_path,
              const std::string& mode, const std::string& init_from,
              const std::string& out_dir) {
  RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (!demos_path.empty()) rc.demos = demos_path;
  if (!mode.empty()) rc.train.mode = mode_from_name(mode);
  if (!out_dir.empty()) rc.out_dir = out_dir;
  if (rc.demos.empty()) throw ArgumentError("no demo file given");
  if (rc.out_dir.empty()) throw ArgumentError("no output directory given");

  DemoSet demos = read_demos(rc.demos);
  if (rc.env.empty()) rc.env = demos.header.env;
  if (rc.env != demos.header.env)
    throw ArgumentError("config env does not match demo header env");

  fs::create_directories(rc.out_dir);
  write_resolved_config(rc, rc.out_dir + "/resolved_config.json");

  Trainer trainer(make_env(rc.env), demos, rc.train, &std::cout);
  if (!init_from.empty()) {
    ParamStore source = ParamStore::load(init_from);
    transfer_init(source, trainer.params());
  }
  std::ofstream csv(rc.out_dir + "/metrics.csv");
  if (!csv) throw IoError("cannot write metrics: " + rc.out_dir);
  trainer.run(&csv, rc.out_dir, rc.checkpoint_interval);
  double sd = 0.0;
  double ret = trainer.evaluate(rc.eval_episodes, 0, &sd);
  std::cout << "final eval return " << ret << " +- " << sd << " over "
            << rc.eval_episodes << " episodes\n";
  std::ofstream ev(rc.out_dir + "/final_eval.json");
  ev << nlohmann::ordered_json{{"eval_return_mean", ret},
                               {"eval_return_std", sd},
                               {"episodes", rc.eval_episodes}}
            .dump(2)
     << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& env_id,
             int episodes, uint64_t seed) {
  auto env = make_env(env_id);
  ParamStore store = ParamStore::load(checkpoint);

  // infer policy sizes from the checkpoint tensors
  const Tensor& wc = store.value("policy.wc");
  PolicyConfig pc;
  pc.num_options = wc.rows();
  pc.embed_dim = wc.cols();
  pc.state_dim = env->state_dim();
  pc.action_dim = env->action_dim();
  pc.discrete_actions = env->discrete_actions();
  pc.hidden = store.value("policy.lo.b0").size();
  int heads = 0;
  while (store.has("policy.hi.wq" + std::to_string(heads))) ++heads;
  pc.heads = heads;
  HierarchicalPolicy policy(pc, "policy.");

  std::vector<double> usage(pc.num_options, 0.0);
  std::vector<double> returns;
  int steps = 0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng = Rng(seed).spawn(e + 1);
    Rollout r = rollout(*env, store, policy, env->horizon(), rng);
    returns.push_back(r.traj.env_return());
    for (int u = 0; u < r.traj.length(); ++u, ++steps)
      usage[r.traj.options[u + 1]] += 1.0;
  }
  double mean = 0.0;
  for (double v : returns) mean += v;
  mean /= returns.size();
  double var = 0.0;
  for (double v : returns) var += (v - mean) * (v - mean);
  double sd = returns.size() > 1 ? std::sqrt(var / (returns.size() - 1)) : 0.0;
  std::cout << "episodes " << episodes << "\n";
  std::cout << "return_mean " << mean << "\n";
  std::cout << "return_std " << sd << "\n";
  for (int i = 0; i < pc.num_options; ++i)
    std::cout << "option_usage_" << i << " "
              << usage[i] / std::max(1, steps) << "\n";
  return kExitOk;
}

int run_oracle_suite(const std::string& suite);

int cmd_export(const std::vector<std::string>& metrics,
               const std::string& out) {
  if (metrics.empty()) throw ArgumentError("no metrics files given");
  // column layout shared by every per-seed metrics file
  std::vector<std::vector<double>> returns;  // [file][episode]
  std::vector<int> episodes;
  std::string header;
  for (const auto& path : metrics) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty metrics file: " + path);
    if (header.empty()) {
      header = line;
      if (line.rfind("episode,env_return_mean,env_return_std", 0) != 0)
        throw ParseError("unexpected metrics schema in " + path);
    } else if (line != header) {
      throw ParseError("metrics schema mismatch in " + path);
    }
    std::vector<double> col;
    std::vector<int> eps;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string field;
      std::getline(ss, field, ',');
      eps.push_back(std::stoi(field));
      std::getline(ss, field, ',');
      col.push_back(std::stod(field));
    }
    if (episodes.empty())
      episodes = eps;
    else if (episodes != eps)
      throw ParseError("metrics files cover different episodes");
    returns.push_back(std::move(col));
  }
  std::ofstream outf(out);
  if (!outf) throw IoError("cannot write: " + out);
  char buf[64];
  outf << "episode,env_return_mean,env_return_std\n";
  for (size_t i = 0; i < episodes.size(); ++i) {
    double mean = 0.0;
    for (const auto& c : returns) mean += c[i];
    mean /= returns.size();
    double var = 0.0;
    for (const auto& c : returns) var += (c[i] - mean) * (c[i] - mean);
    double sd =
        returns.size() > 1 ? std::sqrt(var / (returns.size() - 1)) : 0.0;
    outf << episodes[i];
    std::snprintf(buf, sizeof(buf), "%.17g", mean);
    outf << "," << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", sd);
    outf << "," << buf << "\n";
  }
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

// oracle verification suites over random enumerable instances
int run_oracle_suite(const std::string& suite) {
  using namespace hairl::oracle;
  bool all = suite == "all";
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, double worst) {
    std::cout << (ok ? "pass  " : "FAIL  ") << name << " (worst " << worst
              << ")\n";
    if (!ok) ++failures;
  };

  if (all || suite == "bounds") {
    // directed-information bound chain on random instances
    double worst = -1e300;
    bool ok = true;
    Rng rng(2024);
    for (int inst = 0; inst < 20; ++inst) {
      Rng r = rng.spawn(inst);
      EnumerableMdp mdp = EnumerableMdp::random(2 + r.uniform_int(3), 2,
                                                1 + r.uniform_int(3), r);
      TabularPolicy pol = TabularPolicy::random(mdp.num_states(), 2, 2, r);
      JointTable table = joint_distribution(mdp, pol);
      double di = directed_info_exact(table);
      double ceiling = ldi_ceiling(table);
      double at_exact = ldi_exact(table, exact_posterior(table));
      worst = std::max(worst, ceiling - di);
      worst = std::max(worst, std::abs(at_exact - ceiling));
      if (ceiling > di + 1e-9 || std::abs(at_exact - ceiling) > 1e-9) ok = false;
      if (di < -1e-12) ok = false;
    }
    report("directed-information bound chain", ok, worst);
  }
  if (all || suite == "kl") {
    double worst = 0.0;
    bool ok = true;
    Rng rng(77);
    for (int inst = 0; inst < 100; ++inst) {
      Rng r = rng.spawn(inst);
      EnumerableMdp mdp = EnumerableMdp::random(2 + r.uniform_int(2), 2,
                                                1 + r.uniform_int(2), r);
      TabularPolicy pol = TabularPolicy::random(mdp.num_states(), 2, 2, r);
      FTable f = FTable::random(mdp.num_states(), 2, 2, r);
      KlEquivalence kq = kl_equivalence_check(mdp, f, pol);
      worst = std::max(worst, std::abs(kq.lhs - kq.rhs));
      if (std::abs(kq.lhs - kq.rhs) > 1e-9) ok = false;
    }
    report("discriminator objective equals -KL + log Z", ok, worst);
  }
  if (all || suite == "em") {
    double worst = 0.0;
    bool ok = true;
    Rng rng(91);
    for (int inst = 0; inst < 100; ++inst) {
      Rng r = rng.spawn(inst);
      EnumerableMdp mdp =
          EnumerableMdp::random(2 + r.uniform_int(2), 2, 2, r);
      FTable f = FTable::random(mdp.num_states(), 2, 2, r);
      MleTable table = extended_mle_likelihood(mdp, f);
      TabularPolicy expert = TabularPolicy::random(mdp.num_states(), 2, 2, r);
      XDist demos = x_marginal(joint_distribution(mdp, expert));
      SeqPosterior q = exact_seq_posterior(table);
      EmCheck exact = em_bound_check(table, q, demos);
      worst = std::max(worst, std::abs(exact.gap));
      if (exact.lower_bound > exact.marginal_ll + 1e-9) ok = false;
      if (std::abs(exact.gap) > 1e-9 || std::abs(exact.expected_kl) > 1e-9)
        ok = false;
    }
    report("EM lower bound tight at the exact posterior", ok, worst);
  }
  if (failures) {
    std::cout << failures << " oracle suite(s) failed\n";
    return kExitCheck;
  }
  std::cout << "all oracle checks passed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical adversarial inverse reinforcement learning"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-expert", "generate expert demonstrations");
  std::string gen_env, gen_out;
  int gen_task = 0, gen_episodes = 10;
  uint64_t gen_seed = 1;
  bool gen_annotate = false;
  gen->add_option("--env", gen_env, "environment id")->required();
  gen->add_option("--task", gen_task, "task number when not part of --env");
  gen->add_option("--episodes", gen_episodes, "number of demonstrations");
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--out", gen_out, "output demo file")->required();
  gen->add_flag("--annotate", gen_annotate, "emit option annotations");

  auto* train = app.add_subcommand("train", "train from demonstrations");
  std::string tr_config, tr_demos, tr_mode, tr_init, tr_out;
  train->add_option("--config", tr_config, "JSON config file");
  train->add_option("--demos", tr_demos, "demo file (overrides config)");
  train->add_option("--mode", tr_mode, "h-airl | option-airl | h-gail");
  train->add_option("--init-from", tr_init, "checkpoint for transfer init");
  train->add_option("--out", tr_out, "output directory (overrides config)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_env;
  int ev_episodes = 20;
  uint64_t ev_seed = 1;
  ev->add_option("--checkpoint", ev_ckpt, "parameter checkpoint")->required();
  ev->add_option("--env", ev_env, "environment id")->required();
  ev->add_option("--episodes", ev_episodes, "evaluation episodes");
  ev->add_option("--seed", ev_seed, "random seed");

  auto* oc = app.add_subcommand("oracle-check", "run exact verification suites");
  std::string oc_suite = "all";
  oc->add_option("--suite", oc_suite, "all | bounds | kl | em");

  auto* ex = app.add_subcommand("export", "aggregate metrics CSVs for plotting");
  std::vector<std::string> ex_metrics;
  std::string ex_out;
  ex->add_option("--metrics", ex_metrics, "metrics.csv files")
      ->required()
      ->delimiter(',');
  ex->add_option("--out", ex_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen)
      return cmd_gen_expert(gen_env, gen_task, gen_episodes, gen_seed, gen_out,
                            gen_annotate);
    if (*train) return cmd_train(tr_config, tr_demos, tr_mode, tr_init, tr_out);
    if (*ev) return cmd_eval(ev_ckpt, ev_env, ev_episodes, ev_seed);
    if (*oc) return run_oracle_suite(oc_suite);
    if (*ex) return cmd_export(ex_metrics, ex_out);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
