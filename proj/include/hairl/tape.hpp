// Reverse-mode gradient tape over Tensor values. Each operation appends a
// node holding its value and a backward closure; backward() sweeps the tape
// in reverse and accumulates parameter gradients into the bound ParamStore.
#pragma once

#include <algorithm>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hairl/core.hpp"
#include "hairl/param_store.hpp"

namespace hairl {

struct Var {
  int i = -1;
  bool valid() const { return i >= 0; }
};

class Tape {
 public:
  explicit Tape(ParamStore* store = nullptr) : store_(store) {
    nodes_.reserve(256);
  }

  const Tensor& val(Var v) const { return nodes_[v.i].value; }
  const Tensor& grad_of(Var v) const { return nodes_[v.i].grad; }

  Var constant(Tensor t) { return push(std::move(t), nullptr); }
  Var constant_vec(std::vector<double> v) {
    return constant(Tensor::vec(std::move(v)));
  }
  Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  // leaf bound to a named store parameter; backward() adds into store grads.
  // Repeated requests for one name share a single node so use-site gradients
  // accumulate on it.
  Var param(const std::string& name) {
    if (!store_) throw ArgumentError("tape has no parameter store");
    auto it = param_cache_.find(name);
    if (it != param_cache_.end()) return Var{it->second};
    Var v = push(store_->value(name), nullptr);
    param_nodes_.emplace_back(v.i, name);
    param_cache_[name] = v.i;
    return v;
  }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (int i = 0; i < out.numel(); ++i) out.data[i] += tb.data[i];
    return push(std::move(out), [this, a, b](const Tensor& g, int) {
      axpy(a, g);
      axpy(b, g);
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (int i = 0; i < out.numel(); ++i) out.data[i] -= tb.data[i];
    return push(std::move(out), [this, a, b](const Tensor& g, int) {
      axpy(a, g);
      for (int i = 0; i < g.numel(); ++i) nodes_[b.i].grad.data[i] -= g.data[i];
    });
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (int i = 0; i < out.numel(); ++i) out.data[i] *= tb.data[i];
    return push(std::move(out), [this, a, b](const Tensor& g, int) {
      const Tensor& ta = nodes_[a.i].value;
      const Tensor& tb2 = nodes_[b.i].value;
      for (int i = 0; i < g.numel(); ++i) {
        nodes_[a.i].grad.data[i] += g.data[i] * tb2.data[i];
        nodes_[b.i].grad.data[i] += g.data[i] * ta.data[i];
      }
    });
  }

  Var scale(Var a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v *= c;
    return push(std::move(out), [this, a, c](const Tensor& g, int) {
      for (int i = 0; i < g.numel(); ++i)
        nodes_[a.i].grad.data[i] += c * g.data[i];
    });
  }

  Var add_scalar(Var a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v += c;
    return push(std::move(out),
                [this, a](const Tensor& g, int) { axpy(a, g); });
  }

  Var neg(Var a) { return scale(a, -1.0); }

  Var tanh_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::tanh(v);
    return push(std::move(out), [this, a](const Tensor& g, int self) {
      const Tensor& y = nodes_[self].value;
      for (int i = 0; i < g.numel(); ++i)
        nodes_[a.i].grad.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    });
  }

  Var sigmoid(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = logistic(v);
    return push(std::move(out), [this, a](const Tensor& g, int self) {
      const Tensor& y = nodes_[self].value;
      for (int i = 0; i < g.numel(); ++i)
        nodes_[a.i].grad.data[i] +=
            g.data[i] * y.data[i] * (1.0 - y.data[i]);
    });
  }

  Var exp_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::exp(v);
    return push(std::move(out), [this, a](const Tensor& g, int self) {
      const Tensor& y = nodes_[self].value;
      for (int i = 0; i < g.numel(); ++i)
        nodes_[a.i].grad.data[i] += g.data[i] * y.data[i];
    });
  }

  Var log_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::log(v);
    return push(std::move(out), [this, a](const Tensor& g, int) {
      const Tensor& x = nodes_[a.i].value;
      for (int i = 0; i < g.numel(); ++i)
        nodes_[a.i].grad.data[i] += g.data[i] / x.data[i];
    });
  }

  // gradient is zero outside [lo, hi]
  Var clamp(Var a, double lo, double hi) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::min(hi, std::max(lo, v));
    return push(std::move(out), [this, a, lo, hi](const Tensor& g, int) {
      const Tensor& x = nodes_[a.i].value;
      for (int i = 0; i < g.numel(); ++i)
        if (x.data[i] > lo && x.data[i] < hi)
          nodes_[a.i].grad.data[i] += g.data[i];
    });
  }

  Var minimum(Var a, Var b) {
    check_same(a, b, "minimum");
    Tensor out = val(a);
    const Tensor& tb = val(b);
    for (int i = 0; i < out.numel(); ++i)
      out.data[i] = std::min(out.data[i], tb.data[i]);
    return push(std::move(out), [this, a, b](const Tensor& g, int) {
      const Tensor& ta = nodes_[a.i].value;
      const Tensor& tb2 = nodes_[b.i].value;
      for (int i = 0; i < g.numel(); ++i) {
        if (ta.data[i] <= tb2.data[i])
          nodes_[a.i].grad.data[i] += g.data[i];
        else
          nodes_[b.i].grad.data[i] += g.data[i];
      }
    });
  }

  Var logaddexp(Var a, Var b) {
    check_same(a, b, "logaddexp");
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    Tensor out = ta;
    for (int i = 0; i < out.numel(); ++i) {
      double m = std::max(ta.data[i], tb.data[i]);
      out.data[i] =
          m + std::log(std::exp(ta.data[i] - m) + std::exp(tb.data[i] - m));
    }
    return push(std::move(out), [this, a, b](const Tensor& g, int self) {
      const Tensor& ta2 = nodes_[a.i].value;
      const Tensor& y = nodes_[self].value;
      for (int i = 0; i < g.numel(); ++i) {
        double wa = std::exp(ta2.data[i] - y.data[i]);
        nodes_[a.i].grad.data[i] += g.data[i] * wa;
        nodes_[b.i].grad.data[i] += g.data[i] * (1.0 - wa);
      }
    });
  }

  // value passes through, gradient does not
  Var detach(Var a) { return constant(val(a)); }

  // ---- shape ----

  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    std::vector<double> out;
    for (Var p : parts) {
      const Tensor& t = val(p);
      out.insert(out.end(), t.data.begin(), t.data.end());
    }
    std::vector<Var> ps = parts;
    return push(Tensor::vec(std::move(out)),
                [this, ps](const Tensor& g, int) {
                  int off = 0;
                  for (Var p : ps) {
                    Tensor& pg = nodes_[p.i].grad;
                    for (int i = 0; i < pg.numel(); ++i)
                      pg.data[i] += g.data[off + i];
                    off += pg.numel();
                  }
                });
  }

  Var pick(Var a, int index) {
    const Tensor& t = val(a);
    if (index < 0 || index >= t.numel())
      throw DimensionError("pick: index out of range");
    return push(Tensor::scalar(t.data[index]),
                [this, a, index](const Tensor& g, int) {
                  nodes_[a.i].grad.data[index] += g.data[0];
                });
  }

  // ---- reductions ----

  Var sum(Var a) {
    double s = 0.0;
    for (double v : val(a).data) s += v;
    return push(Tensor::scalar(s), [this, a](const Tensor& g, int) {
      for (double& v : nodes_[a.i].grad.data) v += g.data[0];
    });
  }

  Var mean(Var a) { return scale(sum(a), 1.0 / val(a).numel()); }

  Var dot(Var a, Var b) {
    check_same(a, b, "dot");
    double s = 0.0;
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    for (int i = 0; i < ta.numel(); ++i) s += ta.data[i] * tb.data[i];
    return push(Tensor::scalar(s), [this, a, b](const Tensor& g, int) {
      const Tensor& ta2 = nodes_[a.i].value;
      const Tensor& tb2 = nodes_[b.i].value;
      for (int i = 0; i < ta2.numel(); ++i) {
        nodes_[a.i].grad.data[i] += g.data[0] * tb2.data[i];
        nodes_[b.i].grad.data[i] += g.data[0] * ta2.data[i];
      }
    });
  }

  // ---- linear algebra ----

  // y = A x, A: [m x n], x: [n]
  Var matvec(Var A, Var x) {
    const Tensor& a = val(A);
    const Tensor& v = val(x);
    if (a.ndim() != 2 || v.ndim() != 1 || a.cols() != v.size())
      throw DimensionError("matvec: shapes do not conform");
    int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({m});
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += a.at(i, j) * v.at(j);
      out.at(i) = s;
    }
    return push(std::move(out), [this, A, x, m, n](const Tensor& g, int) {
      const Tensor& a2 = nodes_[A.i].value;
      const Tensor& v2 = nodes_[x.i].value;
      Tensor& ga = nodes_[A.i].grad;
      Tensor& gx = nodes_[x.i].grad;
      for (int i = 0; i < m; ++i) {
        double gi = g.data[i];
        for (int j = 0; j < n; ++j) {
          ga.data[static_cast<size_t>(i) * n + j] += gi * v2.data[j];
          gx.data[j] += gi * a2.data[static_cast<size_t>(i) * n + j];
        }
      }
    });
  }

  // y = A^T x, A: [m x n], x: [m]
  Var matvec_t(Var A, Var x) {
    const Tensor& a = val(A);
    const Tensor& v = val(x);
    if (a.ndim() != 2 || v.ndim() != 1 || a.rows() != v.size())
      throw DimensionError("matvec_t: shapes do not conform");
    int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({n});
    for (int i = 0; i < m; ++i) {
      double vi = v.at(i);
      for (int j = 0; j < n; ++j) out.at(j) += vi * a.at(i, j);
    }
    return push(std::move(out), [this, A, x, m, n](const Tensor& g, int) {
      const Tensor& a2 = nodes_[A.i].value;
      const Tensor& v2 = nodes_[x.i].value;
      Tensor& ga = nodes_[A.i].grad;
      Tensor& gx = nodes_[x.i].grad;
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
          ga.data[static_cast<size_t>(i) * n + j] += v2.data[i] * g.data[j];
          acc += a2.data[static_cast<size_t>(i) * n + j] * g.data[j];
        }
        gx.data[i] += acc;
      }
    });
  }

  // C = A B, A: [m x k], B: [k x n]
  Var matmul(Var A, Var B) {
    const Tensor& a = val(A);
    const Tensor& b = val(B);
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
      throw DimensionError("matmul: shapes do not conform");
    int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        double aip = a.at(i, p);
        for (int j = 0; j < n; ++j) out.at(i, j) += aip * b.at(p, j);
      }
    return push(std::move(out), [this, A, B, m, k, n](const Tensor& g, int) {
      const Tensor& a2 = nodes_[A.i].value;
      const Tensor& b2 = nodes_[B.i].value;
      Tensor& ga = nodes_[A.i].grad;
      Tensor& gb = nodes_[B.i].grad;
      // dA += G B^T ; dB += A^T G
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double gij = g.data[static_cast<size_t>(i) * n + j];
          for (int p = 0; p < k; ++p) {
            ga.data[static_cast<size_t>(i) * k + p] +=
                gij * b2.data[static_cast<size_t>(p) * n + j];
            gb.data[static_cast<size_t>(p) * n + j] +=
                a2.data[static_cast<size_t>(i) * k + p] * gij;
          }
        }
    });
  }

  // y = x W + b, x: [n], W: [n x m], b: [m]
  Var linear(Var x, Var W, Var b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(W);
    const Tensor& bv = val(b);
    if (xv.ndim() != 1 || wv.ndim() != 2 || bv.ndim() != 1 ||
        wv.rows() != xv.size() || wv.cols() != bv.size())
      throw DimensionError("linear: shapes do not conform");
    int n = wv.rows(), m = wv.cols();
    Tensor out = bv;
    for (int i = 0; i < n; ++i) {
      double xi = xv.at(i);
      if (xi == 0.0) continue;
      for (int j = 0; j < m; ++j) out.at(j) += xi * wv.at(i, j);
    }
    return push(std::move(out), [this, x, W, b, n, m](const Tensor& g, int) {
      const Tensor& xv2 = nodes_[x.i].value;
      const Tensor& wv2 = nodes_[W.i].value;
      Tensor& gx = nodes_[x.i].grad;
      Tensor& gw = nodes_[W.i].grad;
      Tensor& gb = nodes_[b.i].grad;
      for (int j = 0; j < m; ++j) gb.data[j] += g.data[j];
      for (int i = 0; i < n; ++i) {
        double xi = xv2.data[i];
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          gw.data[static_cast<size_t>(i) * m + j] += xi * g.data[j];
          acc += wv2.data[static_cast<size_t>(i) * m + j] * g.data[j];
        }
        gx.data[i] += acc;
      }
    });
  }

  // ---- probability ----

  Var softmax(Var logits) {
    const Tensor& x = val(logits);
    if (x.numel() < 1) throw DimensionError("softmax: empty input");
    Tensor out = softmax_value(x);
    return push(std::move(out), [this, logits](const Tensor& g, int self) {
      const Tensor& y = nodes_[self].value;
      double dotgy = 0.0;
      for (int i = 0; i < g.numel(); ++i) dotgy += g.data[i] * y.data[i];
      for (int i = 0; i < g.numel(); ++i)
        nodes_[logits.i].grad.data[i] += y.data[i] * (g.data[i] - dotgy);
    });
  }

  Var log_softmax(Var logits) {
    const Tensor& x = val(logits);
    if (x.numel() < 1) throw DimensionError("log_softmax: empty input");
    double m = *std::max_element(x.data.begin(), x.data.end());
    double z = 0.0;
    for (double v : x.data) z += std::exp(v - m);
    double lz = m + std::log(z);
    Tensor out = x;
    for (double& v : out.data) v -= lz;
    return push(std::move(out), [this, logits](const Tensor& g, int self) {
      const Tensor& y = nodes_[self].value;
      double gsum = 0.0;
      for (int i = 0; i < g.numel(); ++i) gsum += g.data[i];
      for (int i = 0; i < g.numel(); ++i)
        nodes_[logits.i].grad.data[i] +=
            g.data[i] - std::exp(y.data[i]) * gsum;
    });
  }

  // entropy of the categorical given by log-probabilities
  Var entropy_from_log_probs(Var log_probs) {
    Var p = exp_(log_probs);
    return neg(dot(p, log_probs));
  }

  // ---- backward ----

  void backward(Var loss) {
    if (val(loss).numel() != 1)
      throw DimensionError("backward: loss must be scalar");
    if (!std::isfinite(val(loss).data[0]))
      throw NumericError("backward: non-finite loss");
    nodes_[loss.i].grad.data[0] = 1.0;
    for (int i = loss.i; i >= 0; --i)
      if (nodes_[i].back) nodes_[i].back(nodes_[i].grad, i);
    for (auto& [idx, name] : param_nodes_) {
      Tensor& dst = store_->grad(name);
      const Tensor& src = nodes_[idx].grad;
      for (int i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
    }
  }

  size_t size() const { return nodes_.size(); }

  static Tensor softmax_value(const Tensor& x) {
    double m = *std::max_element(x.data.begin(), x.data.end());
    double z = 0.0;
    Tensor out = x;
    for (double& v : out.data) {
      v = std::exp(v - m);
      z += v;
    }
    for (double& v : out.data) v /= z;
    return out;
  }

  static double logistic(double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(const Tensor&, int)> back;
  };

  Var push(Tensor v, std::function<void(const Tensor&, int)> back) {
    Node n;
    n.grad = Tensor::zeros(v.shape);
    n.value = std::move(v);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void check_same(Var a, Var b, const char* op) const {
    if (!val(a).same_shape(val(b)))
      throw DimensionError(std::string(op) + ": shape mismatch");
  }

  void axpy(Var target, const Tensor& g) {
    Tensor& dst = nodes_[target.i].grad;
    for (int i = 0; i < g.numel(); ++i) dst.data[i] += g.data[i];
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, std::string>> param_nodes_;
  std::unordered_map<std::string, int> param_cache_;
  ParamStore* store_;
};

// Standard gated-recurrent-unit cell on tape Vars. Parameter layout:
//   prefix + {wr, ur, br, wu, uu, bu, wh, uh, bh}
// with w*: [x_dim x hidden], u*: [hidden x hidden], b*: [hidden].
struct GruVars {
  Var wr, ur, br, wu, uu, bu, wh, uh, bh;
};

inline void add_gru_params(ParamStore& store, const std::string& prefix,
                           int x_dim, int hidden, Rng& rng) {
  int fan = x_dim + hidden;
  auto mat = [&](int r, int c) { return init_matrix(fan, r, c, rng); };
  store.add(prefix + "wr", mat(x_dim, hidden));
  store.add(prefix + "ur", mat(hidden, hidden));
  store.add(prefix + "br", Tensor::zeros({hidden}));
  store.add(prefix + "wu", mat(x_dim, hidden));
  store.add(prefix + "uu", mat(hidden, hidden));
  store.add(prefix + "bu", Tensor::zeros({hidden}));
  store.add(prefix + "wh", mat(x_dim, hidden));
  store.add(prefix + "uh", mat(hidden, hidden));
  store.add(prefix + "bh", Tensor::zeros({hidden}));
}

inline GruVars bind_gru(Tape& tape, const std::string& prefix) {
  GruVars g;
  g.wr = tape.param(prefix + "wr");
  g.ur = tape.param(prefix + "ur");
  g.br = tape.param(prefix + "br");
  g.wu = tape.param(prefix + "wu");
  g.uu = tape.param(prefix + "uu");
  g.bu = tape.param(prefix + "bu");
  g.wh = tape.param(prefix + "wh");
  g.uh = tape.param(prefix + "uh");
  g.bh = tape.param(prefix + "bh");
  return g;
}

// r = sigm(xWr + hUr + br), u = sigm(xWu + hUu + bu),
// cand = tanh(xWh + (r*h)Uh + bh), h' = (1-u)*h + u*cand
inline Var gru_cell(Tape& t, Var x, Var h_prev, const GruVars& p) {
  Var r = t.sigmoid(t.add(t.linear(x, p.wr, p.br), t.matvec_t(p.ur, h_prev)));
  Var u = t.sigmoid(t.add(t.linear(x, p.wu, p.bu), t.matvec_t(p.uu, h_prev)));
  Var cand = t.tanh_(
      t.add(t.linear(x, p.wh, p.bh), t.matvec_t(p.uh, t.mul(r, h_prev))));
  Var keep = t.mul(t.add_scalar(t.neg(u), 1.0), h_prev);
  return t.add(keep, t.mul(u, cand));
}

}  // namespace hairl
