#include "kondo/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace kondo {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap cmap(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap mmap(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

RowMat gather(const Tensor& t, const RowSet& live) {
  const auto c = static_cast<Eigen::Index>(t.cols());
  RowMat out(static_cast<Eigen::Index>(live.rows.size()), c);
  for (std::size_t i = 0; i < live.rows.size(); ++i) {
    const auto src = t.row(live.rows[i]);
    std::copy(src.begin(), src.end(), out.data() + i * t.cols());
  }
  return out;
}

void scatter_add(Tensor& t, const RowSet& live, const RowMat& m) {
  for (std::size_t i = 0; i < live.rows.size(); ++i) {
    auto dst = t.row(live.rows[i]);
    const double* src = m.data() + i * t.cols();
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
}

template <class F>
void for_live_rows(const RowSet& live, std::size_t total, F&& f) {
  if (live.all) {
    for (std::size_t r = 0; r < total; ++r) f(r);
  } else {
    for (auto r : live.rows) f(r);
  }
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace

Var Tape::input(Tensor value, bool batched, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("input", step_);
  Node n;
  n.op = "input";
  n.value = std::move(value);
  n.batched = batched;
  n.needs_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
  if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
  Node n;
  n.op = "param";
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::uint32_t> parents, bool batched,
                 BackwardFn backward, PropagateFn propagate) {
  if (!value.all_finite()) throw NonFiniteError(std::string(op), step_);
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.batched = batched;
  for (auto p : parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  n.propagate = std::move(propagate);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_sink(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.param) return n.param->grad;
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var out, std::span<const double> seed, const std::vector<bool>& mask,
                    BackwardOptions options) {
  if (backward_done_) throw std::logic_error("backward called twice on the same tape without reset");
  Node& o = nodes_.at(out.id);
  const std::size_t n_samples = o.value.rows();
  if (seed.size() != n_samples || mask.size() != n_samples) {
    throw ShapeError("backward: seed/mask length must equal the batch dimension (" + std::to_string(n_samples) +
                     ")");
  }
  if (o.value.cols() != 1) throw ShapeError("backward: output must hold one value per sample");
  backward_done_ = true;

  std::uint64_t kept = 0;
  for (bool m : mask) kept += m ? 1 : 0;
  if (options.meter) options.meter->add_backward(kept);
  if (!o.needs_grad) return;

  for (auto& n : nodes_) {
    if (n.batched) n.live.assign(n.value.rows(), options.dense ? 1 : 0);
  }
  Tensor& g = grad_sink(out.id);
  o.live.assign(n_samples, options.dense ? 1 : 0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    g[s] = mask[s] ? seed[s] : 0.0;
    if (mask[s]) o.live[s] = 1;
  }
  if (options.dense) std::fill(o.live.begin(), o.live.end(), 1);
  run_backward(out.id, options.dense);
}

void Tape::backward_scalar(Var out, BackwardOptions options) {
  const Tensor& v = value(out);
  if (v.size() != 1) throw ShapeError("backward_scalar: output must have exactly one element");
  if (backward_done_) throw std::logic_error("backward called twice on the same tape without reset");
  backward_done_ = true;
  if (options.meter) options.meter->add_backward(1);
  Node& o = nodes_[out.id];
  if (!o.needs_grad) return;
  for (auto& n : nodes_) {
    if (n.batched) n.live.assign(n.value.rows(), 1);
  }
  grad_sink(out.id)[0] = 1.0;
  run_backward(out.id, true);
}

void Tape::run_backward(std::uint32_t out, bool dense) {
  for (std::int64_t i = out; i >= 0; --i) {
    const auto id = static_cast<std::uint32_t>(i);
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.backward || n.grad.empty()) continue;
    RowSet live;
    if (n.batched && !dense) {
      live.all = std::all_of(n.live.begin(), n.live.end(), [](std::uint8_t b) { return b != 0; });
      if (!live.all) {
        for (std::uint32_t r = 0; r < n.live.size(); ++r) {
          if (n.live[r]) live.rows.push_back(r);
        }
        if (live.rows.empty()) continue;
      }
    }
    n.backward(*this, id, live);
    if (dense) continue;
    if (n.propagate) {
      n.propagate(*this, id);
    } else {
      for (auto p : n.parents) {
        Node& parent = nodes_[p];
        if (!parent.batched || !n.batched) continue;
        for (std::size_t r = 0; r < n.live.size(); ++r) parent.live[r] |= n.live[r];
      }
    }
  }
}

void Tape::reset_backward() {
  for (auto& n : nodes_) {
    if (!n.param) n.grad = Tensor();
    n.live.clear();
  }
  backward_done_ = false;
}

std::uint64_t Tape::kink_signature() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& n : nodes_) {
    if (n.op != "relu") continue;
    for (double v : nodes_[n.parents[0]].value.data()) {
      h ^= (v > 0.0) ? 1u : 0u;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

namespace ops {

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require(A.cols() == B.rows(), "matmul: inner dimensions differ " + shape_string(A.shape()) + " x " +
                                    shape_string(B.shape()));
  require(!t.batched(b.id), "matmul: right operand must not be batched");
  Tensor y({A.rows(), B.cols()});
  mmap(y).noalias() = cmap(A) * cmap(B);
  return t.record("matmul", std::move(y), {a.id, b.id}, t.batched(a.id),
                  [a = a.id, b = b.id](Tape& tp, std::uint32_t self, const RowSet& live) {
                    const Tensor& dy = tp.node_grad(self);
                    const Tensor& A = tp.node_value(a);
                    const Tensor& B = tp.node_value(b);
                    if (live.all) {
                      if (tp.needs_grad(a)) mmap(tp.grad_sink(a)).noalias() += cmap(dy) * cmap(B).transpose();
                      if (tp.needs_grad(b)) mmap(tp.grad_sink(b)).noalias() += cmap(A).transpose() * cmap(dy);
                      return;
                    }
                    const RowMat g = gather(dy, live);
                    if (tp.needs_grad(a)) {
                      RowMat da = g * cmap(B).transpose();
                      scatter_add(tp.grad_sink(a), live, da);
                    }
                    if (tp.needs_grad(b)) {
                      const RowMat x = gather(A, live);
                      mmap(tp.grad_sink(b)).noalias() += x.transpose() * g;
                    }
                  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require(A.shape() == B.shape(), "add: shape mismatch " + shape_string(A.shape()) + " vs " +
                                      shape_string(B.shape()));
  Tensor y = A;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += B[i];
  return t.record("add", std::move(y), {a.id, b.id}, t.batched(a.id) || t.batched(b.id),
                  [a = a.id, b = b.id](Tape& tp, std::uint32_t self, const RowSet& live) {
                    const Tensor& dy = tp.node_grad(self);
                    const std::size_t c = dy.cols();
                    for (auto p : {a, b}) {
                      if (!tp.needs_grad(p)) continue;
                      Tensor& dx = tp.grad_sink(p);
                      for_live_rows(live, dy.rows(), [&](std::size_t r) {
                        for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += dy[r * c + j];
                      });
                    }
                  });
}

Var add_bias(Tape& t, Var x, Var bias) {
  const Tensor& X = t.value(x);
  const Tensor& b = t.value(bias);
  require(b.size() == X.cols(), "add_bias: bias length " + std::to_string(b.size()) + " != columns " +
                                    std::to_string(X.cols()));
  Tensor y = X;
  mmap(y).rowwise() += ConstMap(b.data().data(), 1, static_cast<Eigen::Index>(b.size())).row(0);
  return t.record("add_bias", std::move(y), {x.id, bias.id}, t.batched(x.id),
                  [x = x.id, bias = bias.id](Tape& tp, std::uint32_t self, const RowSet& live) {
                    const Tensor& dy = tp.node_grad(self);
                    const std::size_t c = dy.cols();
                    if (tp.needs_grad(x)) {
                      Tensor& dx = tp.grad_sink(x);
                      if (live.all) {
                        mmap(dx) += cmap(dy);
                      } else {
                        for (auto r : live.rows)
                          for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += dy[r * c + j];
                      }
                    }
                    if (tp.needs_grad(bias)) {
                      Tensor& db = tp.grad_sink(bias);
                      for_live_rows(live, dy.rows(), [&](std::size_t r) {
                        for (std::size_t j = 0; j < c; ++j) db[j] += dy[r * c + j];
                      });
                    }
                  });
}

Var mul(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require(A.shape() == B.shape(), "mul: shape mismatch " + shape_string(A.shape()) + " vs " +
                                      shape_string(B.shape()));
  Tensor y = A;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= B[i];
  return t.record("mul", std::move(y), {a.id, b.id}, t.batched(a.id) || t.batched(b.id),
                  [a = a.id, b = b.id](Tape& tp, std::uint32_t self, const RowSet& live) {
                    const Tensor& dy = tp.node_grad(self);
                    const std::size_t c = dy.cols();
                    const Tensor& A = tp.node_value(a);
                    const Tensor& B = tp.node_value(b);
                    // a and b may be the same node; accumulate one side at a time.
                    if (tp.needs_grad(a)) {
                      Tensor& da = tp.grad_sink(a);
                      for_live_rows(live, dy.rows(), [&](std::size_t r) {
                        for (std::size_t j = 0; j < c; ++j) da[r * c + j] += dy[r * c + j] * B[r * c + j];
                      });
                    }
                    if (tp.needs_grad(b)) {
                      Tensor& db = tp.grad_sink(b);
                      for_live_rows(live, dy.rows(), [&](std::size_t r) {
                        for (std::size_t j = 0; j < c; ++j) db[r * c + j] += dy[r * c + j] * A[r * c + j];
                      });
                    }
                  });
}

Var relu(Tape& t, Var x) {
  Tensor y = t.value(x);
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return t.record("relu", std::move(y), {x.id}, t.batched(x.id),
                  [x = x.id](Tape& tp, std::uint32_t self, const RowSet& live) {
                    if (!tp.needs_grad(x)) return;
                    const Tensor& dy = tp.node_grad(self);
                    const Tensor& X = tp.node_value(x);
                    Tensor& dx = tp.grad_sink(x);
                    const std::size_t c = dy.cols();
                    for_live_rows(live, dy.rows(), [&](std::size_t r) {
                      for (std::size_t j = 0; j < c; ++j) {
                        if (X[r * c + j] > 0.0) dx[r * c + j] += dy[r * c + j];
                      }
                    });
                  });
}

Var sum_cols(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor y({X.rows(), 1});
  for (std::size_t r = 0; r < X.rows(); ++r) {
    double s = 0.0;
    for (double v : X.row(r)) s += v;
    y[r] = s;
  }
  return t.record("sum_cols", std::move(y), {x.id}, t.batched(x.id),
                  [x = x.id](Tape& tp, std::uint32_t self, const RowSet& live) {
                    if (!tp.needs_grad(x)) return;
                    const Tensor& dy = tp.node_grad(self);
                    Tensor& dx = tp.grad_sink(x);
                    for_live_rows(live, dy.rows(), [&](std::size_t r) {
                      for (auto& v : dx.row(r)) v += dy[r];
                    });
                  });
}

namespace {

void log_softmax_rows(const Tensor& x, Tensor& y) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    auto out = y.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (double v : in) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] - lse;
  }
}

}  // namespace

Var sum_rows(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor y({1, X.cols()});
  mmap(y) = cmap(X).colwise().sum();
  return t.record(
      "sum_rows", std::move(y), {x.id}, false,
      [x = x.id](Tape& tp, std::uint32_t self, const RowSet&) {
        if (!tp.needs_grad(x)) return;
        const Tensor& dy = tp.node_grad(self);
        Tensor& dx = tp.grad_sink(x);
        for (std::size_t r = 0; r < dx.rows(); ++r)
          for (std::size_t j = 0; j < dx.cols(); ++j) dx.at(r, j) += dy[j];
      },
      [x = x.id](Tape& tp, std::uint32_t) {
        if (!tp.batched(x)) return;
        auto& in_live = tp.live(x);
        std::fill(in_live.begin(), in_live.end(), 1);
      });
}

Var softmax(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor y(X.shape());
  log_softmax_rows(X, y);
  for (auto& v : y.data()) v = std::exp(v);
  return t.record("softmax", std::move(y), {x.id}, t.batched(x.id),
                  [x = x.id](Tape& tp, std::uint32_t self, const RowSet& live) {
                    if (!tp.needs_grad(x)) return;
                    const Tensor& dy = tp.node_grad(self);
                    const Tensor& Y = tp.node_value(self);
                    Tensor& dx = tp.grad_sink(x);
                    const std::size_t c = dy.cols();
                    for_live_rows(live, dy.rows(), [&](std::size_t r) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < c; ++j) dot += dy[r * c + j] * Y[r * c + j];
                      for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += Y[r * c + j] * (dy[r * c + j] - dot);
                    });
                  });
}

Var log_softmax(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor y(X.shape());
  log_softmax_rows(X, y);
  return t.record("log_softmax", std::move(y), {x.id}, t.batched(x.id),
                  [x = x.id](Tape& tp, std::uint32_t self, const RowSet& live) {
                    if (!tp.needs_grad(x)) return;
                    const Tensor& dy = tp.node_grad(self);
                    const Tensor& Y = tp.node_value(self);
                    Tensor& dx = tp.grad_sink(x);
                    const std::size_t c = dy.cols();
                    for_live_rows(live, dy.rows(), [&](std::size_t r) {
                      double s = 0.0;
                      for (std::size_t j = 0; j < c; ++j) s += dy[r * c + j];
                      for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += dy[r * c + j] - std::exp(Y[r * c + j]) * s;
                    });
                  });
}

Var layernorm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& X = t.value(x);
  const Tensor& G = t.value(gain);
  const Tensor& B = t.value(bias);
  const std::size_t c = X.cols();
  require(G.size() == c && B.size() == c, "layernorm: gain/bias length must equal columns");
  Tensor y(X.shape());
  auto rstd = std::make_shared<std::vector<double>>(X.rows());
  auto mean = std::make_shared<std::vector<double>>(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto in = X.row(r);
    double mu = 0.0;
    for (double v : in) mu += v;
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (double v : in) var += (v - mu) * (v - mu);
    var /= static_cast<double>(c);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    (*mean)[r] = mu;
    auto out = y.row(r);
    for (std::size_t j = 0; j < c; ++j) out[j] = G[j] * (in[j] - mu) * rs + B[j];
  }
  return t.record("layernorm", std::move(y), {x.id, gain.id, bias.id}, t.batched(x.id),
                  [x = x.id, gain = gain.id, bias = bias.id, rstd, mean](Tape& tp, std::uint32_t self,
                                                                         const RowSet& live) {
                    const Tensor& dy = tp.node_grad(self);
                    const Tensor& X = tp.node_value(x);
                    const Tensor& G = tp.node_value(gain);
                    const std::size_t c = dy.cols();
                    const double inv_c = 1.0 / static_cast<double>(c);
                    Tensor* dx = tp.needs_grad(x) ? &tp.grad_sink(x) : nullptr;
                    Tensor* dg = tp.needs_grad(gain) ? &tp.grad_sink(gain) : nullptr;
                    Tensor* db = tp.needs_grad(bias) ? &tp.grad_sink(bias) : nullptr;
                    std::vector<double> xhat(c), dxhat(c);
                    for_live_rows(live, dy.rows(), [&](std::size_t r) {
                      const double rs = (*rstd)[r];
                      const double mu = (*mean)[r];
                      double m1 = 0.0, m2 = 0.0;
                      for (std::size_t j = 0; j < c; ++j) {
                        xhat[j] = (X[r * c + j] - mu) * rs;
                        const double g = dy[r * c + j];
                        dxhat[j] = g * G[j];
                        m1 += dxhat[j];
                        m2 += dxhat[j] * xhat[j];
                        if (dg) (*dg)[j] += g * xhat[j];
                        if (db) (*db)[j] += g;
                      }
                      if (!dx) return;
                      m1 *= inv_c;
                      m2 *= inv_c;
                      for (std::size_t j = 0; j < c; ++j) (*dx)[r * c + j] += rs * (dxhat[j] - m1 - xhat[j] * m2);
                    });
                  });
}

Var embedding(Tape& t, Var table, std::span<const std::uint32_t> ids) {
  const Tensor& T = t.value(table);
  const std::size_t d = T.cols();
  Tensor y({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= T.rows()) {
      throw std::out_of_range("embedding: vocab index " + std::to_string(ids[i]) + " out of range [0, " +
                              std::to_string(T.rows()) + ")");
    }
    const auto src = T.row(ids[i]);
    std::copy(src.begin(), src.end(), y.row(i).begin());
  }
  std::vector<std::uint32_t> idv(ids.begin(), ids.end());
  return t.record("embedding", std::move(y), {table.id}, true,
                  [table = table.id, idv = std::move(idv)](Tape& tp, std::uint32_t self, const RowSet& live) {
                    if (!tp.needs_grad(table)) return;
                    const Tensor& dy = tp.node_grad(self);
                    Tensor& dt = tp.grad_sink(table);
                    const std::size_t d = dy.cols();
                    for_live_rows(live, dy.rows(), [&](std::size_t r) {
                      auto dst = dt.row(idv[r]);
                      for (std::size_t j = 0; j < d; ++j) dst[j] += dy[r * d + j];
                    });
                  });
}

Var causal_attention(Tape& t, Var qkv, std::size_t seq_len, std::size_t heads) {
  const Tensor& X = t.value(qkv);
  require(X.cols() % 3 == 0, "causal_attention: columns must be 3*d_model");
  const std::size_t d = X.cols() / 3;
  require(heads > 0 && d % heads == 0, "causal_attention: d_model must be divisible by heads");
  require(seq_len > 0 && X.rows() % seq_len == 0, "causal_attention: rows must be a multiple of seq_len");
  const std::size_t n_seq = X.rows() / seq_len;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t stride = 3 * d;
  const std::size_t T = seq_len;

  // probs[((n*heads + h)*T + t)*T + j], zero for j > t
  auto probs = std::make_shared<std::vector<double>>(n_seq * heads * T * T, 0.0);
  Tensor y({X.rows(), d});
  std::vector<double> row(T);
  for (std::size_t n = 0; n < n_seq; ++n) {
    const double* base = X.data().data() + n * T * stride;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t tq = 0; tq < T; ++tq) {
        const double* q = base + tq * stride + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= tq; ++j) {
          const double* k = base + j * stride + d + h * dh;
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += q[e] * k[e];
          row[j] = s * scale;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= tq; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        double* p = probs->data() + ((n * heads + h) * T + tq) * T;
        double* out = y.data().data() + (n * T + tq) * d + h * dh;
        for (std::size_t j = 0; j <= tq; ++j) {
          p[j] = row[j] / z;
          const double* v = base + j * stride + 2 * d + h * dh;
          for (std::size_t e = 0; e < dh; ++e) out[e] += p[j] * v[e];
        }
      }
    }
  }

  auto backward = [qkv = qkv.id, probs, T, heads, d, dh, scale](Tape& tp, std::uint32_t self, const RowSet& live) {
    if (!tp.needs_grad(qkv)) return;
    const Tensor& dy = tp.node_grad(self);
    const Tensor& X = tp.node_value(qkv);
    Tensor& dx = tp.grad_sink(qkv);
    const std::size_t stride = 3 * d;
    std::vector<double> dp(T);
    for_live_rows(live, dy.rows(), [&](std::size_t r) {
      const std::size_t n = r / T;
      const std::size_t tq = r % T;
      const double* base = X.data().data() + n * T * stride;
      double* dbase = dx.data().data() + n * T * stride;
      for (std::size_t h = 0; h < heads; ++h) {
        const double* p = probs->data() + ((n * heads + h) * T + tq) * T;
        const double* go = dy.data().data() + r * d + h * dh;
        double s = 0.0;
        for (std::size_t j = 0; j <= tq; ++j) {
          const double* v = base + j * stride + 2 * d + h * dh;
          double* dv = dbase + j * stride + 2 * d + h * dh;
          double acc = 0.0;
          for (std::size_t e = 0; e < dh; ++e) {
            acc += go[e] * v[e];
            dv[e] += p[j] * go[e];
          }
          dp[j] = acc;
          s += p[j] * acc;
        }
        const double* q = base + tq * stride + h * dh;
        double* dq = dbase + tq * stride + h * dh;
        for (std::size_t j = 0; j <= tq; ++j) {
          const double ds = p[j] * (dp[j] - s) * scale;
          const double* k = base + j * stride + d + h * dh;
          double* dk = dbase + j * stride + d + h * dh;
          for (std::size_t e = 0; e < dh; ++e) {
            dq[e] += ds * k[e];
            dk[e] += ds * q[e];
          }
        }
      }
    });
  };
  auto propagate = [qkv = qkv.id, T](Tape& tp, std::uint32_t self) {
    if (!tp.batched(qkv)) return;
    auto& out_live = tp.live(self);
    auto& in_live = tp.live(qkv);
    const std::size_t n_seq = out_live.size() / T;
    for (std::size_t n = 0; n < n_seq; ++n) {
      std::size_t last = T;
      for (std::size_t tq = T; tq-- > 0;) {
        if (out_live[n * T + tq]) {
          last = tq;
          break;
        }
      }
      if (last == T) continue;
      for (std::size_t j = 0; j <= last; ++j) in_live[n * T + j] = 1;
    }
  };
  return t.record("causal_attention", std::move(y), {qkv.id}, t.batched(qkv.id), std::move(backward),
                  std::move(propagate));
}

Var select_rows(Tape& t, Var x, std::span<const std::uint32_t> rows) {
  const Tensor& X = t.value(x);
  const std::size_t c = X.cols();
  Tensor y({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= X.rows()) throw std::out_of_range("select_rows: row index out of range");
    const auto src = X.row(rows[i]);
    std::copy(src.begin(), src.end(), y.row(i).begin());
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  auto shared = std::make_shared<std::vector<std::uint32_t>>(std::move(idx));
  return t.record(
      "select_rows", std::move(y), {x.id}, true,
      [x = x.id, shared](Tape& tp, std::uint32_t self, const RowSet& live) {
        if (!tp.needs_grad(x)) return;
        const Tensor& dy = tp.node_grad(self);
        Tensor& dx = tp.grad_sink(x);
        const std::size_t c = dy.cols();
        for_live_rows(live, dy.rows(), [&](std::size_t r) {
          auto dst = dx.row((*shared)[r]);
          for (std::size_t j = 0; j < c; ++j) dst[j] += dy[r * c + j];
        });
      },
      [x = x.id, shared](Tape& tp, std::uint32_t self) {
        if (!tp.batched(x)) return;
        const auto& out_live = tp.live(self);
        for (std::size_t r = 0; r < out_live.size(); ++r) {
          if (out_live[r]) tp.mark_live(x, (*shared)[r]);
        }
      });
}

Var pick(Tape& t, Var x, std::span<const std::uint32_t> rows, std::span<const std::uint32_t> cols) {
  const Tensor& X = t.value(x);
  require(rows.size() == cols.size(), "pick: rows and cols must have equal length");
  Tensor y(Shape{rows.size()});
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s] >= X.rows() || cols[s] >= X.cols()) throw std::out_of_range("pick: index out of range");
    y[s] = X.at(rows[s], cols[s]);
  }
  auto r_idx = std::make_shared<std::vector<std::uint32_t>>(rows.begin(), rows.end());
  auto c_idx = std::make_shared<std::vector<std::uint32_t>>(cols.begin(), cols.end());
  return t.record(
      "pick", std::move(y), {x.id}, true,
      [x = x.id, r_idx, c_idx](Tape& tp, std::uint32_t self, const RowSet& live) {
        if (!tp.needs_grad(x)) return;
        const Tensor& dy = tp.node_grad(self);
        Tensor& dx = tp.grad_sink(x);
        for_live_rows(live, dy.rows(), [&](std::size_t s) { dx.at((*r_idx)[s], (*c_idx)[s]) += dy[s]; });
      },
      [x = x.id, r_idx](Tape& tp, std::uint32_t self) {
        if (!tp.batched(x)) return;
        const auto& out_live = tp.live(self);
        for (std::size_t s = 0; s < out_live.size(); ++s) {
          if (out_live[s]) tp.mark_live(x, (*r_idx)[s]);
        }
      });
}

}  // namespace ops

}  // namespace kondo
