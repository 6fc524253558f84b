#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kondo {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an engine op produces NaN/Inf. Carries the op name and the
// training step the tape was labelled with.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string op, std::int64_t step);
  const std::string& op() const { return op_; }
  std::int64_t step() const { return step_; }

 private:
  std::string op_;
  std::int64_t step_;
};

/// Dense row-major array of doubles. Tensors of rank > 2 are viewed as
/// [shape[0], product(rest)] by the 2-D accessors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const { return rows() == 0 ? 0 : size() / rows(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(double value);
  bool all_finite() const;
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// A trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(0.0); }
};

/// Counts per-sample forward and backward passes. backward_samples only
/// grows for rows a backward kernel actually processed.
class ComputeMeter {
 public:
  explicit ComputeMeter(double cost_ratio = 1.0) : cost_ratio_(cost_ratio) {}

  void add_forward(std::uint64_t n) { forward_ += n; }
  void add_backward(std::uint64_t n);

  std::uint64_t forward_samples() const { return forward_; }
  std::uint64_t backward_samples() const { return backward_; }
  double cost_ratio() const { return cost_ratio_; }

  double total_compute() const { return total_compute(cost_ratio_); }
  double total_compute(double c) const {
    return static_cast<double>(forward_) + c * static_cast<double>(backward_);
  }

 private:
  std::uint64_t forward_ = 0;
  std::uint64_t backward_ = 0;
  double cost_ratio_;
};

}  // namespace kondo
