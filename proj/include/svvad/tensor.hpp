#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "svvad/rng.hpp"

namespace svvad {

namespace detail {

struct Node {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;   // row-major
  std::vector<double> grad;     // allocated on demand during backward
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(const Node&)> backward_fn;

  size_t size() const { return rows * cols; }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

// Dense rank-2 tensor (vectors are 1xN or Nx1, scalars 1x1) carrying an
// optional reverse-mode gradient tape. Double precision throughout; all
// reductions run in a fixed serial order so results are reproducible.
//
// Graph nodes are immutable once consumed by an op. mutable_values() exists
// for leaf initialization and optimizer updates between graph builds.
class Tensor {
 public:
  Tensor() = default;
  Tensor(size_t rows, size_t cols, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_values(size_t rows, size_t cols,
                            std::vector<double> values,
                            bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  size_t rows() const { return node_->rows; }
  size_t cols() const { return node_->cols; }
  size_t size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }

  double at(size_t r, size_t c) const {
    return node_->values[r * node_->cols + c];
  }
  // Value of a 1x1 tensor.
  double scalar_value() const;

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& mutable_values();

  bool has_grad() const { return node_->grad.size() == node_->values.size(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  std::string shape_str() const;

  // Internal handle used by the op implementations.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- forward ops -----------------------------------------------------------
// Elementwise binary ops broadcast a 1xC row, an Rx1 column or a 1x1 scalar
// against an RxC operand. Shape mismatches throw std::invalid_argument naming
// both shapes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor sqrt_op(const Tensor& x);  // requires x >= 0

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor softmax_rows(const Tensor& x);
// Row-wise layer norm with learned gain/bias (both 1xF).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-8);
// 1-D depthwise convolution over rows (time); kernel is KxF with K odd,
// zero-padded "same" output.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, size_t start, size_t n);
Tensor slice_rows(const Tensor& x, size_t start, size_t n);
Tensor gather_rows(const Tensor& x, const std::vector<size_t>& indices);
Tensor tile_rows(const Tensor& row, size_t times);
Tensor reshape(const Tensor& x, size_t rows, size_t cols);

Tensor sum_all(const Tensor& x);    // -> 1x1
Tensor mean_all(const Tensor& x);   // -> 1x1
Tensor mean_rows(const Tensor& x);  // RxC -> 1xC (mean over rows)
Tensor sum_cols(const Tensor& x);   // RxC -> Rx1 (sum over columns)

// Mean over rows of -log softmax(logits)[label]; labels.size() == rows.
Tensor softmax_cross_entropy_rows(const Tensor& logits,
                                  const std::vector<int>& labels);

// --- autograd --------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Gradients accumulate (+=) into every
// reachable tensor that requires grad, so repeated calls between zero_grad()
// implement gradient accumulation.
void backward(const Tensor& loss);

// --- parameters ------------------------------------------------------------

struct Parameter {
  std::string name;
  Tensor tensor;
};

// Named trainable leaves with deterministic, name-seeded initialization.
// Iteration order is insertion order, which fixes checkpoint layout and
// optimizer update order.
class ParameterStore {
 public:
  explicit ParameterStore(uint64_t seed) : seed_(seed) {}

  // Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
  Tensor create_glorot(const std::string& name, size_t rows, size_t cols,
                       size_t fan_in, size_t fan_out);
  Tensor create_constant(const std::string& name, size_t rows, size_t cols,
                         double value);

  bool has(const std::string& name) const;
  Tensor get(const std::string& name) const;
  const std::vector<Parameter>& parameters() const { return params_; }
  size_t total_size() const;
  uint64_t seed() const { return seed_; }

  void zero_grads();
  // FNV over the raw value bytes, in insertion order.
  uint64_t values_hash() const;

 private:
  uint64_t seed_;
  std::vector<Parameter> params_;
};

}  // namespace svvad
