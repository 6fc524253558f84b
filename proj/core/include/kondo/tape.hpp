#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "kondo/tensor.hpp"

namespace kondo {

/// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

/// Row indices a backward kernel must process. `all` short-circuits to the
/// dense path.
struct RowSet {
  bool all = true;
  std::vector<std::uint32_t> rows;
  std::size_t count(std::size_t total) const { return all ? total : rows.size(); }
};

struct BackwardOptions {
  // Process every row, zeroing the seed on masked rows, instead of skipping
  // masked rows in the kernels. Used to cross-check row skipping.
  bool dense = false;
  ComputeMeter* meter = nullptr;
};

/// Reverse-mode tape over a closed set of primitive ops.
///
/// A node is "batched" when its leading dimension indexes samples (or
/// tokens). Liveness is tracked per batched row during backward so that rows
/// excluded by the sample mask are never touched by any kernel.
class Tape {
 public:
  explicit Tape(std::int64_t step = 0) : step_(step) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var input(Tensor value, bool batched = true, bool requires_grad = false);
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient buffer of an input created with requires_grad (empty otherwise).
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  std::size_t size() const { return nodes_.size(); }
  std::int64_t step() const { return step_; }

  /// Accumulates d(sum_s seed[s] * out[s]) into parameter gradients, only
  /// through samples with mask[s] set. `out` must be a batched node with one
  /// value per sample.
  void backward(Var out, std::span<const double> seed, const std::vector<bool>& mask,
                BackwardOptions options = {});
  /// Backward from a single-element output with seed 1.
  void backward_scalar(Var out, BackwardOptions options = {});
  bool backward_done() const { return backward_done_; }
  /// Clears node gradients so backward may run again (parameter gradients
  /// are left untouched).
  void reset_backward();

  /// Hash of the sign pattern of every relu input. Changes iff some relu
  /// crosses its kink.
  std::uint64_t kink_signature() const;

  // --- recording interface used by ops ---------------------------------
  using BackwardFn = std::function<void(Tape&, std::uint32_t self, const RowSet& live)>;
  using PropagateFn = std::function<void(Tape&, std::uint32_t self)>;

  Var record(std::string_view op, Tensor value, std::vector<std::uint32_t> parents, bool batched,
             BackwardFn backward, PropagateFn propagate = {});

  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  bool batched(std::uint32_t id) const { return nodes_[id].batched; }
  const std::vector<std::uint32_t>& parents(std::uint32_t id) const { return nodes_[id].parents; }
  const Tensor& node_value(std::uint32_t id) const { return nodes_[id].value; }
  const Tensor& node_grad(std::uint32_t id) const { return nodes_[id].grad; }
  /// Gradient sink for a node; parameters write straight into Parameter::grad.
  Tensor& grad_sink(std::uint32_t id);
  std::vector<std::uint8_t>& live(std::uint32_t id) { return nodes_[id].live; }
  void mark_live(std::uint32_t id, std::uint32_t row) {
    if (nodes_[id].batched) nodes_[id].live[row] = 1;
  }

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> parents;
    Parameter* param = nullptr;
    bool batched = false;
    bool needs_grad = false;
    std::vector<std::uint8_t> live;
    BackwardFn backward;
    PropagateFn propagate;
  };

  void run_backward(std::uint32_t out, bool dense);

  std::vector<Node> nodes_;
  std::int64_t step_;
  bool backward_done_ = false;
};

namespace ops {

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var add_bias(Tape& t, Var x, Var bias);
Var mul(Tape& t, Var a, Var b);
Var relu(Tape& t, Var x);
Var sum_cols(Tape& t, Var x);
/// Column sums over all rows; the result is a single unbatched row.
Var sum_rows(Tape& t, Var x);
Var softmax(Tape& t, Var x);
Var log_softmax(Tape& t, Var x);
Var layernorm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);
Var embedding(Tape& t, Var table, std::span<const std::uint32_t> ids);
/// Multi-head causal self-attention over packed [n_seq*seq_len, 3*d] rows
/// holding (q | k | v) for consecutive sequences of length seq_len.
Var causal_attention(Tape& t, Var qkv, std::size_t seq_len, std::size_t heads);
Var select_rows(Tape& t, Var x, std::span<const std::uint32_t> rows);
/// out[s] = x[rows[s], cols[s]]; the result is batched over s.
Var pick(Tape& t, Var x, std::span<const std::uint32_t> rows, std::span<const std::uint32_t> cols);

}  // namespace ops

}  // namespace kondo
