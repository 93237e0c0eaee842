// Exact brute-force computation on enumerable MDP instances of the
// quantities behind the training objectives: the joint trajectory/option
// distribution, directed information and its variational bound, the
// energy-based trajectory model with its exact partition function, the
// discriminator-to-KL equivalence, and the EM lower bound.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "hairl/core.hpp"
#include "hairl/envs.hpp"
#include "hairl/option_policy.hpp"
#include "hairl/posterior.hpp"
#include "hairl/rollout.hpp"

namespace hairl::oracle {

// ---------------------------------------------------------------------------
// Tabular representations
// ---------------------------------------------------------------------------

struct TabularPolicy {
  int S = 0, A = 0, N = 0;
  std::vector<double> hi;  // [s][z_prev][z]
  std::vector<double> lo;  // [s][z][a]

  double high(int s, int zp, int z) const {
    return hi[(static_cast<size_t>(s) * N + zp) * N + z];
  }
  double low(int s, int z, int a) const {
    return lo[(static_cast<size_t>(s) * N + z) * A + a];
  }

  static TabularPolicy random(int S, int A, int N, Rng& rng) {
    TabularPolicy p;
    p.S = S;
    p.A = A;
    p.N = N;
    p.hi.resize(static_cast<size_t>(S) * N * N);
    p.lo.resize(static_cast<size_t>(S) * N * A);
    auto fill_rows = [&](std::vector<double>& v, int row_len) {
      for (size_t i = 0; i < v.size(); i += row_len) {
        double tot = 0.0;
        for (int j = 0; j < row_len; ++j) {
          v[i + j] = 0.05 + rng.uniform();
          tot += v[i + j];
        }
        for (int j = 0; j < row_len; ++j) v[i + j] /= tot;
      }
    };
    fill_rows(p.hi, N);
    fill_rows(p.lo, A);
    return p;
  }
};

// tabulates the actual policy networks on an enumerable MDP
inline TabularPolicy tabulate_policy(ParamStore& store,
                                     const HierarchicalPolicy& policy,
                                     const EnumerableMdp& mdp) {
  TabularPolicy p;
  p.S = mdp.num_states();
  p.A = mdp.num_actions();
  p.N = policy.config().num_options;
  p.hi.resize(static_cast<size_t>(p.S) * p.N * p.N);
  p.lo.resize(static_cast<size_t>(p.S) * p.N * p.A);
  for (int s = 0; s < p.S; ++s) {
    Tensor feat = Tensor::vec(mdp.features(s));
    for (int zp = 0; zp < p.N; ++zp) {
      Tape t(&store);
      const Tensor& lp = t.val(policy.high_log_probs(t, feat, zp));
      for (int z = 0; z < p.N; ++z)
        p.hi[(static_cast<size_t>(s) * p.N + zp) * p.N + z] = std::exp(lp.at(z));
    }
    for (int z = 0; z < p.N; ++z) {
      Tape t(&store);
      const Tensor& lp = t.val(policy.low_log_probs_discrete(t, feat, z));
      for (int a = 0; a < p.A; ++a)
        p.lo[(static_cast<size_t>(s) * p.N + z) * p.A + a] = std::exp(lp.at(a));
    }
  }
  return p;
}

// reward/energy table f(s, z, z_next, a)
struct FTable {
  int S = 0, A = 0, N = 0;
  std::vector<double> f;

  double operator()(int s, int z, int zn, int a) const {
    return f[((static_cast<size_t>(s) * N + z) * N + zn) * A + a];
  }
  double& at(int s, int z, int zn, int a) {
    return f[((static_cast<size_t>(s) * N + z) * N + zn) * A + a];
  }

  static FTable zeros(int S, int A, int N) {
    FTable t;
    t.S = S;
    t.A = A;
    t.N = N;
    t.f.assign(static_cast<size_t>(S) * N * N * A, 0.0);
    return t;
  }
  static FTable random(int S, int A, int N, Rng& rng, double scale = 1.0) {
    FTable t = zeros(S, A, N);
    for (double& v : t.f) v = rng.uniform(-scale, scale);
    return t;
  }
};

// ---------------------------------------------------------------------------
// Joint distribution over (X_{0:T}, Z_{0:T}) under a hierarchical policy
// ---------------------------------------------------------------------------

struct JointEntry {
  std::vector<int> states;   // S_0..S_T
  std::vector<int> actions;  // A_0..A_{T-1}
  std::vector<int> options;  // Z_0..Z_T, Z_0 = 0
  double prob = 0.0;
};

struct JointTable {
  int S = 0, A = 0, N = 0, T = 0;
  std::vector<JointEntry> entries;

  double total_mass() const {
    double m = 0.0;
    for (const auto& e : entries) m += e.prob;
    return m;
  }
};

inline void check_enumeration_cap(const EnumerableMdp& mdp, int N) {
  double size = mdp.initial(0) * 0.0 + 1.0;
  for (int t = 0; t <= mdp.horizon(); ++t) size *= mdp.num_states();
  for (int t = 0; t < mdp.horizon(); ++t)
    size *= static_cast<double>(mdp.num_actions()) * N;
  if (size > 1e7)
    throw SizeError("enumeration would exceed the 1e7-entry cap");
}

// P(X_{0:t}, Z_{0:t}) = mu(S_0) prod_i pi_hi(Z_i|S_{i-1},Z_{i-1})
//                       pi_lo(A_{i-1}|S_{i-1},Z_i) P(S_i|S_{i-1},A_{i-1})
inline JointTable joint_distribution(const EnumerableMdp& mdp,
                                     const TabularPolicy& pol) {
  check_enumeration_cap(mdp, pol.N);
  JointTable table;
  table.S = mdp.num_states();
  table.A = mdp.num_actions();
  table.N = pol.N;
  table.T = mdp.horizon();

  JointEntry cur;
  std::function<void(int, double)> expand = [&](int t, double prob) {
    if (prob == 0.0) return;
    if (t == table.T) {
      cur.prob = prob;
      table.entries.push_back(cur);
      return;
    }
    int s = cur.states[t];
    int zp = cur.options[t];
    for (int z = 0; z < table.N; ++z)
      for (int a = 0; a < table.A; ++a)
        for (int s2 = 0; s2 < table.S; ++s2) {
          double p = prob * pol.high(s, zp, z) * pol.low(s, z, a) *
                     mdp.transition(s, a, s2);
          if (p == 0.0) continue;
          cur.options.push_back(z);
          cur.actions.push_back(a);
          cur.states.push_back(s2);
          expand(t + 1, p);
          cur.states.pop_back();
          cur.actions.pop_back();
          cur.options.pop_back();
        }
  };
  for (int s0 = 0; s0 < table.S; ++s0) {
    if (mdp.initial(s0) == 0.0) continue;
    cur = JointEntry{};
    cur.states = {s0};
    cur.options = {0};
    expand(0, mdp.initial(s0));
  }
  return table;
}

// marginal frequency of (s, a) pairs over decision steps, averaged over time
inline std::vector<double> occupancy(const JointTable& table) {
  std::vector<double> occ(static_cast<size_t>(table.S) * table.A, 0.0);
  for (const auto& e : table.entries)
    for (int t = 0; t < table.T; ++t)
      occ[static_cast<size_t>(e.states[t]) * table.A + e.actions[t]] +=
          e.prob / table.T;
  return occ;
}

// ---------------------------------------------------------------------------
// Directed information and its variational bound
// ---------------------------------------------------------------------------

using Key = std::vector<int>;

inline Key x_key(const JointEntry& e, int t) {
  Key k;
  k.insert(k.end(), e.states.begin(), e.states.begin() + t + 1);
  k.insert(k.end(), e.actions.begin(), e.actions.begin() + t);
  return k;
}
inline Key z_key(const JointEntry& e, int t) {
  return Key(e.options.begin(), e.options.begin() + t + 1);
}
inline Key concat_key(Key a, const Key& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// H(child | parent) from grouped masses: parent key misses the last variable
inline double conditional_entropy(const std::map<Key, double>& child,
                                  const std::map<Key, double>& parent,
                                  std::function<Key(const Key&)> to_parent) {
  double h = 0.0;
  for (const auto& [k, p] : child) {
    if (p <= 0.0) continue;
    double pp = parent.at(to_parent(k));
    h -= p * std::log(p / pp);
  }
  return h;
}

// I(X_{0:T} -> Z_{0:T}) = sum_t [ H(Z_t|Z^{t-1}) - H(Z_t|X^t,Z^{t-1}) ], nats
inline double directed_info_exact(const JointTable& table) {
  double info = 0.0;
  for (int t = 1; t <= table.T; ++t) {
    std::map<Key, double> z_par, z_full, xz_par, xz_full;
    for (const auto& e : table.entries) {
      Key zp = z_key(e, t - 1);
      Key zf = z_key(e, t);
      Key x = x_key(e, t);
      z_par[zp] += e.prob;
      z_full[zf] += e.prob;
      xz_par[concat_key(x, zp)] += e.prob;
      xz_full[concat_key(x, zf)] += e.prob;
    }
    double h_z_given_hist = conditional_entropy(
        z_full, z_par, [](const Key& k) { return Key(k.begin(), k.end() - 1); });
    double h_z_given_x = conditional_entropy(
        xz_full, xz_par,
        [](const Key& k) { return Key(k.begin(), k.end() - 1); });
    info += h_z_given_hist - h_z_given_x;
  }
  return info;
}

// third line of the bound chain: sum_t [ H(Z_t|X^{t-1},Z^{t-1}) - H(Z_t|X^t,Z^{t-1}) ],
// the value the variational bound attains at the exact posterior
inline double ldi_ceiling(const JointTable& table) {
  double total = 0.0;
  for (int t = 1; t <= table.T; ++t) {
    std::map<Key, double> hist_par, hist_full, xz_par, xz_full;
    for (const auto& e : table.entries) {
      Key zp = z_key(e, t - 1);
      Key zf = z_key(e, t);
      hist_par[concat_key(x_key(e, t - 1), zp)] += e.prob;
      hist_full[concat_key(x_key(e, t - 1), zf)] += e.prob;
      xz_par[concat_key(x_key(e, t), zp)] += e.prob;
      xz_full[concat_key(x_key(e, t), zf)] += e.prob;
    }
    auto drop_last = [](const Key& k) { return Key(k.begin(), k.end() - 1); };
    total += conditional_entropy(hist_full, hist_par, drop_last) -
             conditional_entropy(xz_full, xz_par, drop_last);
  }
  return total;
}

// log P(Z_t = . | X_{0:t}, Z_{0:t-1}) for a given history prefix
using StepPosterior = std::function<std::vector<double>(
    const std::vector<int>& states, const std::vector<int>& actions,
    const std::vector<int>& z_prefix)>;

// exact expectation of the variational bound under the enumerated joint
inline double ldi_exact(const JointTable& table, const StepPosterior& post) {
  double total = 0.0;
  for (int t = 1; t <= table.T; ++t) {
    // entropy term H(Z_t | X^{t-1}, Z^{t-1})
    std::map<Key, double> hist_par, hist_full;
    for (const auto& e : table.entries) {
      hist_par[concat_key(x_key(e, t - 1), z_key(e, t - 1))] += e.prob;
      hist_full[concat_key(x_key(e, t - 1), z_key(e, t))] += e.prob;
    }
    total += conditional_entropy(
        hist_full, hist_par,
        [](const Key& k) { return Key(k.begin(), k.end() - 1); });
    // reconstruction term, grouped by unique (x^t, z^t) prefix
    struct Prefix {
      std::vector<int> states, actions, zp;
      int zt;
    };
    std::map<Key, std::pair<double, Prefix>> groups;
    for (const auto& e : table.entries) {
      Key k = concat_key(x_key(e, t), z_key(e, t));
      auto& slot = groups[k];
      if (slot.first == 0.0) {
        slot.second.states.assign(e.states.begin(), e.states.begin() + t + 1);
        slot.second.actions.assign(e.actions.begin(), e.actions.begin() + t);
        slot.second.zp.assign(e.options.begin(), e.options.begin() + t);
        slot.second.zt = e.options[t];
      }
      slot.first += e.prob;
    }
    for (const auto& [k, g] : groups) {
      std::vector<double> lp =
          post(g.second.states, g.second.actions, g.second.zp);
      total += g.first * lp[g.second.zt];
    }
  }
  return total;
}

// P(Z_t | X^t, Z^{t-1}) computed from the table by marginalization; the
// oracle stand-in for a perfectly trained posterior
inline StepPosterior exact_posterior(const JointTable& table) {
  auto masses = std::make_shared<std::map<Key, std::vector<double>>>();
  int n = table.N;
  for (int t = 1; t <= table.T; ++t) {
    for (const auto& e : table.entries) {
      Key k = concat_key(x_key(e, t), z_key(e, t - 1));
      k.push_back(t);  // disambiguate prefix lengths
      auto& v = (*masses)[k];
      if (v.empty()) v.assign(n, 0.0);
      v[e.options[t]] += e.prob;
    }
  }
  return [masses, n](const std::vector<int>& states,
                     const std::vector<int>& actions,
                     const std::vector<int>& zp) {
    Key k;
    k.insert(k.end(), states.begin(), states.end());
    k.insert(k.end(), actions.begin(), actions.end());
    k.insert(k.end(), zp.begin(), zp.end());
    k.push_back(static_cast<int>(zp.size()));
    auto it = masses->find(k);
    if (it == masses->end())
      throw ArgumentError("exact_posterior: prefix outside the joint support");
    double tot = 0.0;
    for (double v : it->second) tot += v;
    std::vector<double> lp(n);
    for (int z = 0; z < n; ++z) lp[z] = std::log(it->second[z] / tot);
    return lp;
  };
}

// adapter: the recurrent posterior network evaluated on one-hot features
inline StepPosterior network_posterior(ParamStore& store,
                                       const RecurrentPosterior& post,
                                       const EnumerableMdp& mdp) {
  return [&store, &post, &mdp](const std::vector<int>& states,
                               const std::vector<int>& actions,
                               const std::vector<int>& zp) {
    Tape t(&store);
    PosteriorState st = post.init_state(t);
    std::vector<double> a_dummy(mdp.num_actions(), 0.0);
    st = post.step(t, st, post.x_features(a_dummy, mdp.features(states[0])), 0)
             .second;
    int tt = static_cast<int>(actions.size());
    Var lp;
    for (int i = 1; i <= tt; ++i) {
      std::vector<double> ar(mdp.num_actions(), 0.0);
      ar[actions[i - 1]] = 1.0;
      auto [emit, next] =
          post.step(t, st, post.x_features(ar, mdp.features(states[i])),
                    zp[i - 1]);
      lp = emit;
      st = next;
    }
    return t.val(lp).data;
  };
}

// ---------------------------------------------------------------------------
// Energy-based trajectory model P_theta(X, Z) with exact partition function
// ---------------------------------------------------------------------------

struct MleTable {
  int S = 0, A = 0, N = 0, T = 0;
  std::vector<JointEntry> entries;  // prob normalized by the partition sum
  double log_z = 0.0;
};

inline MleTable extended_mle_likelihood(const EnumerableMdp& mdp,
                                        const FTable& f) {
  check_enumeration_cap(mdp, f.N);
  MleTable out;
  out.S = mdp.num_states();
  out.A = mdp.num_actions();
  out.N = f.N;
  out.T = mdp.horizon();

  JointEntry cur;
  double z_sum = 0.0;
  std::function<void(int, double)> expand = [&](int t, double w) {
    if (w == 0.0) return;
    if (t == out.T) {
      cur.prob = w;
      z_sum += w;
      out.entries.push_back(cur);
      return;
    }
    int s = cur.states[t];
    int zp = cur.options[t];
    for (int z = 0; z < out.N; ++z)
      for (int a = 0; a < out.A; ++a) {
        double e = std::exp(f(s, zp, z, a));
        for (int s2 = 0; s2 < out.S; ++s2) {
          double p = w * e * mdp.transition(s, a, s2);
          if (p == 0.0) continue;
          cur.options.push_back(z);
          cur.actions.push_back(a);
          cur.states.push_back(s2);
          expand(t + 1, p);
          cur.states.pop_back();
          cur.actions.pop_back();
          cur.options.pop_back();
        }
      }
  };
  for (int s0 = 0; s0 < out.S; ++s0) {
    if (mdp.initial(s0) == 0.0) continue;
    cur = JointEntry{};
    cur.states = {s0};
    cur.options = {0};
    expand(0, mdp.initial(s0));
  }
  for (auto& e : out.entries) e.prob /= z_sum;
  out.log_z = std::log(z_sum);
  return out;
}

// ---------------------------------------------------------------------------
// Appendix-style equivalences
// ---------------------------------------------------------------------------

// lhs: exact expected sum of imitation rewards under the policy.
// rhs: -KL(pi || pi_E) + log Z, with pi_E the normalized energy model.
// The two are algebraically identical for any f.
struct KlEquivalence {
  double lhs = 0.0;
  double rhs = 0.0;
  double kl = 0.0;
  double log_z = 0.0;
};

inline KlEquivalence kl_equivalence_check(const EnumerableMdp& mdp,
                                          const FTable& f,
                                          const TabularPolicy& pol) {
  JointTable pi = joint_distribution(mdp, pol);
  MleTable pe = extended_mle_likelihood(mdp, f);
  std::map<Key, double> pe_map;
  for (const auto& e : pe.entries)
    pe_map[concat_key(concat_key(Key(e.states), Key(e.actions)),
                      Key(e.options))] = e.prob;

  KlEquivalence out;
  out.log_z = pe.log_z;
  for (const auto& e : pi.entries) {
    if (e.prob == 0.0) continue;
    double sum_r = 0.0;
    for (int t = 0; t < pi.T; ++t) {
      double log_pi_step =
          std::log(pol.high(e.states[t], e.options[t], e.options[t + 1])) +
          std::log(pol.low(e.states[t], e.options[t + 1], e.actions[t]));
      sum_r += f(e.states[t], e.options[t], e.options[t + 1], e.actions[t]) -
               log_pi_step;
    }
    out.lhs += e.prob * sum_r;
    Key k = concat_key(concat_key(Key(e.states), Key(e.actions)),
                       Key(e.options));
    double pe_prob = pe_map.at(k);
    out.kl += e.prob * std::log(e.prob / pe_prob);
  }
  out.rhs = -out.kl + pe.log_z;
  return out;
}

// full-sequence posterior log q(Z_{1:T} | X_{0:T}); options include the dummy
using SeqPosterior = std::function<double(const std::vector<int>& states,
                                          const std::vector<int>& actions,
                                          const std::vector<int>& options)>;

inline SeqPosterior seq_from_step(const StepPosterior& step, int T) {
  return [step, T](const std::vector<int>& states,
                   const std::vector<int>& actions,
                   const std::vector<int>& options) {
    double lp = 0.0;
    for (int t = 1; t <= T; ++t) {
      std::vector<int> st(states.begin(), states.begin() + t + 1);
      std::vector<int> ac(actions.begin(), actions.begin() + t);
      std::vector<int> zp(options.begin(), options.begin() + t);
      lp += step(st, ac, zp)[options[t]];
    }
    return lp;
  };
}

// exact conditional P_theta(Z | X) from the energy model
inline SeqPosterior exact_seq_posterior(const MleTable& table) {
  auto by_x = std::make_shared<std::map<Key, double>>();
  auto full = std::make_shared<std::map<Key, double>>();
  for (const auto& e : table.entries) {
    Key x = concat_key(Key(e.states), Key(e.actions));
    (*by_x)[x] += e.prob;
    (*full)[concat_key(x, Key(e.options))] = e.prob;
  }
  return [by_x, full](const std::vector<int>& states,
                      const std::vector<int>& actions,
                      const std::vector<int>& options) {
    Key x = concat_key(Key(states), Key(actions));
    Key k = concat_key(x, Key(options));
    auto it = full->find(k);
    double joint = it == full->end() ? 0.0 : it->second;
    double marg = by_x->at(x);
    return std::log(joint / marg);
  };
}

// distribution over trajectories X used as the demonstration measure
struct XSeq {
  std::vector<int> states;
  std::vector<int> actions;
};
using XDist = std::vector<std::pair<XSeq, double>>;

inline XDist x_marginal(const JointTable& table) {
  std::map<Key, std::pair<XSeq, double>> grouped;
  for (const auto& e : table.entries) {
    Key k = concat_key(Key(e.states), Key(e.actions));
    auto& slot = grouped[k];
    if (slot.second == 0.0) slot.first = XSeq{e.states, e.actions};
    slot.second += e.prob;
  }
  XDist out;
  for (auto& [k, v] : grouped) out.push_back(std::move(v));
  return out;
}

struct EmCheck {
  double marginal_ll = 0.0;   // E_X[log P_theta(X)]
  double lower_bound = 0.0;   // E_{X, Z~q}[log P_theta(X,Z) - log q(Z|X)]
  double gap = 0.0;           // marginal_ll - lower_bound
  double expected_kl = 0.0;   // E_X[KL(q(.|X) || P_theta(.|X))]
};

inline EmCheck em_bound_check(const MleTable& table, const SeqPosterior& q,
                              const XDist& demos) {
  std::map<Key, double> full, by_x;
  for (const auto& e : table.entries) {
    Key x = concat_key(Key(e.states), Key(e.actions));
    by_x[x] += e.prob;
    full[concat_key(x, Key(e.options))] = e.prob;
  }
  int T = table.T, N = table.N;
  EmCheck out;
  for (const auto& [xs, w] : demos) {
    if (w == 0.0) continue;
    Key xk = concat_key(Key(xs.states), Key(xs.actions));
    double marg = by_x.at(xk);
    out.marginal_ll += w * std::log(marg);
    // enumerate option sequences Z_1..Z_T
    std::vector<int> options(T + 1, 0);
    double bound = 0.0, kl = 0.0;
    std::function<void(int)> loop = [&](int t) {
      if (t > T) {
        double lq = q(xs.states, xs.actions, options);
        double pq = std::exp(lq);
        if (pq <= 0.0) return;
        double joint = full.at(concat_key(xk, Key(options)));
        bound += pq * (std::log(joint) - lq);
        kl += pq * (lq - std::log(joint / marg));
        return;
      }
      for (int z = 0; z < N; ++z) {
        options[t] = z;
        loop(t + 1);
      }
    };
    loop(1);
    out.lower_bound += w * bound;
    out.expected_kl += w * kl;
  }
  out.gap = out.marginal_ll - out.lower_bound;
  return out;
}

// ---------------------------------------------------------------------------
// Exact EM on the tabular energy model: E-step uses the exact conditional of
// the previous parameters, M-step improves Q by gradient ascent with
// backtracking, which makes the marginal log-likelihood non-decreasing.
// ---------------------------------------------------------------------------

inline std::vector<double> exact_em_run(const EnumerableMdp& mdp, FTable f,
                                        const XDist& demos, int outer_iters,
                                        int grad_steps = 25) {
  auto marginal_ll = [&](const MleTable& table) {
    std::map<Key, double> by_x;
    for (const auto& e : table.entries)
      by_x[concat_key(Key(e.states), Key(e.actions))] += e.prob;
    double ll = 0.0;
    for (const auto& [xs, w] : demos)
      ll += w * std::log(by_x.at(concat_key(Key(xs.states), Key(xs.actions))));
    return ll;
  };

  auto q_value = [&](const FTable& ft, const std::vector<double>& data_counts) {
    // Q(theta) = sum_counts * f - log Z  (dynamics terms are constant)
    MleTable table = extended_mle_likelihood(mdp, ft);
    double q = -table.log_z;
    for (size_t i = 0; i < ft.f.size(); ++i) q += data_counts[i] * ft.f[i];
    return q;
  };

  std::vector<double> trace;
  trace.push_back(marginal_ll(extended_mle_likelihood(mdp, f)));
  for (int outer = 0; outer < outer_iters; ++outer) {
    MleTable table = extended_mle_likelihood(mdp, f);
    // E-step: expected feature counts under q(Z|X) = P_old(Z|X), X ~ demos
    std::map<Key, double> by_x;
    for (const auto& e : table.entries)
      by_x[concat_key(Key(e.states), Key(e.actions))] += e.prob;
    std::vector<double> data_counts(f.f.size(), 0.0);
    for (const auto& e : table.entries) {
      Key xk = concat_key(Key(e.states), Key(e.actions));
      double post_w = e.prob / by_x.at(xk);
      // weight of this X under the demo distribution
      for (const auto& [xs, w] : demos) {
        if (w == 0.0) continue;
        if (Key(xs.states) != Key(e.states) ||
            Key(xs.actions) != Key(e.actions))
          continue;
        for (int t = 0; t < table.T; ++t) {
          size_t idx = ((static_cast<size_t>(e.states[t]) * f.N +
                         e.options[t]) * f.N + e.options[t + 1]) * f.A +
                       e.actions[t];
          data_counts[idx] += w * post_w;
        }
      }
    }
    // M-step: ascend Q with backtracking so Q never decreases
    for (int g = 0; g < grad_steps; ++g) {
      MleTable cur = extended_mle_likelihood(mdp, f);
      std::vector<double> model_counts(f.f.size(), 0.0);
      for (const auto& e : cur.entries)
        for (int t = 0; t < cur.T; ++t) {
          size_t idx = ((static_cast<size_t>(e.states[t]) * f.N +
                         e.options[t]) * f.N + e.options[t + 1]) * f.A +
                       e.actions[t];
          model_counts[idx] += e.prob;
        }
      double q0 = q_value(f, data_counts);
      double step = 0.5;
      FTable cand = f;
      for (int bt = 0; bt < 30; ++bt) {
        for (size_t i = 0; i < f.f.size(); ++i)
          cand.f[i] = f.f[i] + step * (data_counts[i] - model_counts[i]);
        if (q_value(cand, data_counts) >= q0) break;
        step *= 0.5;
      }
      f = cand;
    }
    trace.push_back(marginal_ll(extended_mle_likelihood(mdp, f)));
  }
  return trace;
}

}  // namespace hairl::oracle
