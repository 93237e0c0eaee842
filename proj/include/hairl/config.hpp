// Run configuration: a strict key-value JSON file mirroring the train
// configuration plus run-level fields. Unknown keys are rejected and the
// resolved configuration is echoed before training so runs can be repeated
// exactly.
#pragma once

#include <fstream>
#include <set>
#include <string>

#include "hairl/trainer.hpp"

#include "json.hpp"

namespace hairl {

struct RunConfig {
  std::string env;
  std::string demos;
  std::string out_dir;
  int checkpoint_interval = 0;
  int eval_episodes = 20;
  TrainConfig train;
};

inline const std::set<std::string>& run_config_keys() {
  static const std::set<std::string> keys = {
      "env",
      "demos",
      "out_dir",
      "checkpoint_interval",
      "eval_episodes",
      "num_options",
      "embed_dim",
      "attention_heads",
      "horizon",
      "rollouts_per_episode",
      "episodes",
      "alpha1",
      "alpha2",
      "alpha1_warmup_frac",
      "alpha1_cutoff_frac",
      "lr_policy",
      "lr_posterior",
      "lr_discriminator",
      "clip_ratio",
      "discount",
      "gae_lambda",
      "seed",
      "mode",
      "expert_annotations",
      "inner_steps_posterior",
      "inner_steps_discriminator",
      "em_every",
      "policy_epochs",
      "anneal_lr",
      "workers",
      "policy_hidden",
      "posterior_hidden",
      "posterior_x_embed",
      "disc_hidden",
      "il_clamp"};
  return keys;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!run_config_keys().count(it.key()))
      throw ParseError("unknown config key: " + it.key());
  RunConfig rc;
  TrainConfig& t = rc.train;
  rc.env = j.value("env", rc.env);
  rc.demos = j.value("demos", rc.demos);
  rc.out_dir = j.value("out_dir", rc.out_dir);
  rc.checkpoint_interval = j.value("checkpoint_interval", rc.checkpoint_interval);
  rc.eval_episodes = j.value("eval_episodes", rc.eval_episodes);
  t.num_options = j.value("num_options", t.num_options);
  t.embed_dim = j.value("embed_dim", t.embed_dim);
  t.attention_heads = j.value("attention_heads", t.attention_heads);
  t.horizon = j.value("horizon", t.horizon);
  t.rollouts_per_episode = j.value("rollouts_per_episode", t.rollouts_per_episode);
  t.episodes = j.value("episodes", t.episodes);
  t.alpha1 = j.value("alpha1", t.alpha1);
  t.alpha2 = j.value("alpha2", t.alpha2);
  t.alpha1_warmup_frac = j.value("alpha1_warmup_frac", t.alpha1_warmup_frac);
  t.alpha1_cutoff_frac = j.value("alpha1_cutoff_frac", t.alpha1_cutoff_frac);
  t.lr_policy = j.value("lr_policy", t.lr_policy);
  t.lr_posterior = j.value("lr_posterior", t.lr_posterior);
  t.lr_discriminator = j.value("lr_discriminator", t.lr_discriminator);
  t.clip_ratio = j.value("clip_ratio", t.clip_ratio);
  t.discount = j.value("discount", t.discount);
  t.gae_lambda = j.value("gae_lambda", t.gae_lambda);
  t.seed = j.value("seed", t.seed);
  if (j.contains("mode")) t.mode = mode_from_name(j.at("mode").get<std::string>());
  if (j.contains("expert_annotations")) {
    std::string v = j.at("expert_annotations").get<std::string>();
    if (v == "provided")
      t.annotations_provided = true;
    else if (v == "inferred")
      t.annotations_provided = false;
    else
      throw ParseError("expert_annotations must be provided or inferred");
  }
  t.inner_steps_posterior = j.value("inner_steps_posterior", t.inner_steps_posterior);
  t.inner_steps_discriminator =
      j.value("inner_steps_discriminator", t.inner_steps_discriminator);
  t.em_every = j.value("em_every", t.em_every);
  t.policy_epochs = j.value("policy_epochs", t.policy_epochs);
  t.anneal_lr = j.value("anneal_lr", t.anneal_lr);
  t.workers = j.value("workers", t.workers);
  t.policy_hidden = j.value("policy_hidden", t.policy_hidden);
  t.posterior_hidden = j.value("posterior_hidden", t.posterior_hidden);
  t.posterior_x_embed = j.value("posterior_x_embed", t.posterior_x_embed);
  t.disc_hidden = j.value("disc_hidden", t.disc_hidden);
  t.il_clamp = j.value("il_clamp", t.il_clamp);
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config parse error: ") + e.what());
  }
  return run_config_from_json(j);
}

inline nlohmann::ordered_json resolved_config_json(const RunConfig& rc) {
  TrainConfig t = resolve_config(rc.train);
  return nlohmann::ordered_json{
      {"env", rc.env},
      {"demos", rc.demos},
      {"out_dir", rc.out_dir},
      {"checkpoint_interval", rc.checkpoint_interval},
      {"eval_episodes", rc.eval_episodes},
      {"num_options", t.num_options},
      {"embed_dim", t.embed_dim},
      {"attention_heads", t.attention_heads},
      {"horizon", t.horizon},
      {"rollouts_per_episode", t.rollouts_per_episode},
      {"episodes", t.episodes},
      {"alpha1", t.alpha1},
      {"alpha2", t.alpha2},
      {"alpha1_warmup_frac", t.alpha1_warmup_frac},
      {"alpha1_cutoff_frac", t.alpha1_cutoff_frac},
      {"lr_policy", t.lr_policy},
      {"lr_posterior", t.lr_posterior},
      {"lr_discriminator", t.lr_discriminator},
      {"clip_ratio", t.clip_ratio},
      {"discount", t.discount},
      {"gae_lambda", t.gae_lambda},
      {"seed", t.seed},
      {"mode", mode_name(t.mode)},
      {"expert_annotations", t.annotations_provided ? "provided" : "inferred"},
      {"inner_steps_posterior", t.inner_steps_posterior},
      {"inner_steps_discriminator", t.inner_steps_discriminator},
      {"em_every", t.em_every},
      {"policy_epochs", t.policy_epochs},
      {"anneal_lr", t.anneal_lr},
      {"workers", t.workers},
      {"policy_hidden", t.policy_hidden},
      {"posterior_hidden", t.posterior_hidden},
      {"posterior_x_embed", t.posterior_x_embed},
      {"disc_hidden", t.disc_hidden},
      {"il_clamp", t.il_clamp}};
}

inline void write_resolved_config(const RunConfig& rc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write resolved config: " + path);
  out << resolved_config_json(rc).dump(2) << "\n";
}

}  // namespace hairl
