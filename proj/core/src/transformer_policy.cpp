#include "kondo/transformer_policy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kondo {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

ConstMap cmap(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
ConstMap bias_row(const Tensor& b) { return ConstMap(b.data().data(), 1, static_cast<Eigen::Index>(b.size())); }

Parameter normal_param(std::string name, Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal() * stddev;
  return Parameter(std::move(name), std::move(t));
}

Parameter const_param(std::string name, Shape shape, double value) {
  return Parameter(std::move(name), Tensor::filled(std::move(shape), value));
}

// Same arithmetic as ops::layernorm so both paths agree to rounding.
RowMat layernorm_rows(const RowMat& x, const Tensor& g, const Tensor& b) {
  RowMat y(x.rows(), x.cols());
  const auto c = static_cast<std::size_t>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double* in = x.data() + r * x.cols();
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += in[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(c);
    const double rs = 1.0 / std::sqrt(var + 1e-5);
    double* out = y.data() + r * x.cols();
    for (std::size_t j = 0; j < c; ++j) out[j] = g[j] * (in[j] - mu) * rs + b[j];
  }
  return y;
}

}  // namespace

TransformerPolicy::TransformerPolicy(TransformerConfig config, Rng& init) : config_(config) {
  const std::size_t d = config_.d_model;
  if (config_.heads == 0 || d % config_.heads != 0) {
    throw std::invalid_argument("transformer: d_model must be divisible by heads");
  }
  const double s = config_.init_std;
  const double s_resid = s / std::sqrt(2.0 * static_cast<double>(config_.layers));
  tok_emb_ = normal_param("tok_emb", {input_vocab(), d}, s, init);
  pos_emb_ = normal_param("pos_emb", {config_.max_len, d}, s, init);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    Block b;
    b.ln1_g = const_param(p + "ln1.g", {d}, 1.0);
    b.ln1_b = const_param(p + "ln1.b", {d}, 0.0);
    b.w_qkv = normal_param(p + "attn.w_qkv", {d, 3 * d}, s, init);
    b.b_qkv = const_param(p + "attn.b_qkv", {3 * d}, 0.0);
    b.w_o = normal_param(p + "attn.w_o", {d, d}, s_resid, init);
    b.b_o = const_param(p + "attn.b_o", {d}, 0.0);
    b.ln2_g = const_param(p + "ln2.g", {d}, 1.0);
    b.ln2_b = const_param(p + "ln2.b", {d}, 0.0);
    b.w1 = normal_param(p + "ff.w1", {d, config_.ff}, s, init);
    b.b1 = const_param(p + "ff.b1", {config_.ff}, 0.0);
    b.w2 = normal_param(p + "ff.w2", {config_.ff, d}, s_resid, init);
    b.b2 = const_param(p + "ff.b2", {d}, 0.0);
    blocks_.push_back(std::move(b));
  }
  lnf_g_ = const_param("lnf.g", {d}, 1.0);
  lnf_b_ = const_param("lnf.b", {d}, 0.0);
  head_w_ = normal_param("head.w", {d, config_.vocab}, s, init);
  head_b_ = const_param("head.b", {config_.vocab}, 0.0);
}

TransformerPolicy::Output TransformerPolicy::forward(Tape& tape, std::span<const std::uint32_t> tokens,
                                                     std::size_t seq_len, std::span<const std::uint32_t> out_rows,
                                                     ComputeMeter* meter) {
  if (seq_len == 0 || tokens.size() % seq_len != 0) {
    throw ShapeError("transformer: token count must be a multiple of seq_len");
  }
  if (seq_len > config_.max_len) throw ShapeError("transformer: sequence longer than max_len");
  std::vector<std::uint32_t> positions(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) positions[i] = static_cast<std::uint32_t>(i % seq_len);

  Var x = ops::add(tape, ops::embedding(tape, tape.param(tok_emb_), tokens),
                   ops::embedding(tape, tape.param(pos_emb_), positions));
  for (auto& b : blocks_) {
    Var h = ops::layernorm(tape, x, tape.param(b.ln1_g), tape.param(b.ln1_b));
    Var qkv = ops::add_bias(tape, ops::matmul(tape, h, tape.param(b.w_qkv)), tape.param(b.b_qkv));
    Var att = ops::causal_attention(tape, qkv, seq_len, config_.heads);
    Var o = ops::add_bias(tape, ops::matmul(tape, att, tape.param(b.w_o)), tape.param(b.b_o));
    x = ops::add(tape, x, o);
    Var h2 = ops::layernorm(tape, x, tape.param(b.ln2_g), tape.param(b.ln2_b));
    Var f = ops::relu(tape, ops::add_bias(tape, ops::matmul(tape, h2, tape.param(b.w1)), tape.param(b.b1)));
    Var f2 = ops::add_bias(tape, ops::matmul(tape, f, tape.param(b.w2)), tape.param(b.b2));
    x = ops::add(tape, x, f2);
  }
  Var sel = ops::select_rows(tape, x, out_rows);
  Var hf = ops::layernorm(tape, sel, tape.param(lnf_g_), tape.param(lnf_b_));
  Var logits = ops::add_bias(tape, ops::matmul(tape, hf, tape.param(head_w_)), tape.param(head_b_));
  if (meter) meter->add_forward(out_rows.size());
  return {logits, ops::log_softmax(tape, logits)};
}

Tensor TransformerPolicy::logits(std::span<const std::uint32_t> tokens, std::size_t seq_len) {
  std::vector<std::uint32_t> rows(tokens.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint32_t>(i);
  Tape tape;
  const Output out = forward(tape, tokens, seq_len, rows);
  return tape.value(out.logits);
}

TransformerDecoder TransformerPolicy::decoder(std::size_t n_seq) const { return TransformerDecoder(*this, n_seq); }

std::vector<Parameter*> TransformerPolicy::parameters() {
  std::vector<Parameter*> out{&tok_emb_, &pos_emb_};
  for (auto& b : blocks_) {
    for (Parameter* p : {&b.ln1_g, &b.ln1_b, &b.w_qkv, &b.b_qkv, &b.w_o, &b.b_o, &b.ln2_g, &b.ln2_b, &b.w1, &b.b1,
                         &b.w2, &b.b2}) {
      out.push_back(p);
    }
  }
  for (Parameter* p : {&lnf_g_, &lnf_b_, &head_w_, &head_b_}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> TransformerPolicy::parameters() const {
  auto mut = const_cast<TransformerPolicy*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

TransformerDecoder::TransformerDecoder(const TransformerPolicy& policy, std::size_t n_seq)
    : policy_(&policy), n_seq_(n_seq) {
  const auto& c = policy.config();
  for (std::size_t l = 0; l < c.layers; ++l) {
    keys_.emplace_back(Shape{n_seq * c.max_len, c.d_model});
    values_.emplace_back(Shape{n_seq * c.max_len, c.d_model});
  }
}

void TransformerDecoder::repeat_each(std::size_t times) {
  const auto& c = policy_->config();
  const std::size_t row = c.max_len * c.d_model;
  for (auto* caches : {&keys_, &values_}) {
    for (auto& t : *caches) {
      Tensor grown(Shape{n_seq_ * times * c.max_len, c.d_model});
      for (std::size_t i = 0; i < n_seq_; ++i) {
        for (std::size_t k = 0; k < times; ++k) {
          std::copy_n(t.data().data() + i * row, pos_ * c.d_model, grown.data().data() + (i * times + k) * row);
        }
      }
      t = std::move(grown);
    }
  }
  n_seq_ *= times;
}

Tensor TransformerDecoder::feed(std::span<const std::uint32_t> tokens) {
  const TransformerPolicy& p = *policy_;
  const auto& c = p.config();
  if (tokens.size() != n_seq_) throw ShapeError("decoder: expected one token per sequence");
  if (pos_ >= c.max_len) throw ShapeError("decoder: sequence exceeds max_len");
  const std::size_t d = c.d_model;
  const auto n = static_cast<Eigen::Index>(n_seq_);
  const std::size_t dh = d / c.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  RowMat x(n, static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n_seq_; ++i) {
    if (tokens[i] >= p.input_vocab()) {
      throw std::out_of_range("decoder: vocab index " + std::to_string(tokens[i]) + " out of range");
    }
    const auto te = p.tok_emb_.value.row(tokens[i]);
    const auto pe = p.pos_emb_.value.row(pos_);
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = te[j] + pe[j];
  }

  std::vector<double> scores(pos_ + 1);
  for (std::size_t l = 0; l < p.blocks_.size(); ++l) {
    const auto& b = p.blocks_[l];
    RowMat h = layernorm_rows(x, b.ln1_g.value, b.ln1_b.value);
    RowMat qkv = h * cmap(b.w_qkv.value);
    qkv.rowwise() += bias_row(b.b_qkv.value).row(0);
    Tensor& kc = keys_[l];
    Tensor& vc = values_[l];
    for (std::size_t i = 0; i < n_seq_; ++i) {
      const double* src = qkv.data() + i * 3 * d;
      std::copy_n(src + d, d, kc.data().data() + (i * c.max_len + pos_) * d);
      std::copy_n(src + 2 * d, d, vc.data().data() + (i * c.max_len + pos_) * d);
    }
    RowMat att = RowMat::Zero(n, static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n_seq_; ++i) {
      const double* kbase = kc.data().data() + i * c.max_len * d;
      const double* vbase = vc.data().data() + i * c.max_len * d;
      for (std::size_t hh = 0; hh < c.heads; ++hh) {
        const double* q = qkv.data() + i * 3 * d + hh * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= pos_; ++j) {
          const double* k = kbase + j * d + hh * dh;
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += q[e] * k[e];
          scores[j] = s * scale;
          mx = std::max(mx, scores[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= pos_; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          z += scores[j];
        }
        double* out = att.data() + i * d + hh * dh;
        for (std::size_t j = 0; j <= pos_; ++j) {
          const double w = scores[j] / z;
          const double* v = vbase + j * d + hh * dh;
          for (std::size_t e = 0; e < dh; ++e) out[e] += w * v[e];
        }
      }
    }
    RowMat o = att * cmap(b.w_o.value);
    o.rowwise() += bias_row(b.b_o.value).row(0);
    x += o;
    RowMat h2 = layernorm_rows(x, b.ln2_g.value, b.ln2_b.value);
    RowMat f = h2 * cmap(b.w1.value);
    f.rowwise() += bias_row(b.b1.value).row(0);
    f = f.cwiseMax(0.0);
    RowMat f2 = f * cmap(b.w2.value);
    f2.rowwise() += bias_row(b.b2.value).row(0);
    x += f2;
  }
  RowMat hf = layernorm_rows(x, p.lnf_g_.value, p.lnf_b_.value);
  RowMat logits = hf * cmap(p.head_w_.value);
  logits.rowwise() += bias_row(p.head_b_.value).row(0);
  ++pos_;

  Tensor out(Shape{n_seq_, c.vocab});
  std::copy(logits.data(), logits.data() + logits.size(), out.data().begin());
  if (!out.all_finite()) throw NonFiniteError("decoder.feed", -1);
  return out;
}

}  // namespace kondo
