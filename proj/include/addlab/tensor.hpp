/*
 * Copyright 2026 The addlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef ADDLAB_TENSOR_HPP
#define ADDLAB_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "addlab/rng.hpp"

namespace addlab {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename Real>
class Tensor;

namespace detail {

template <typename Real>
struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  Real* grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), Real(0));
    return grad.data();
  }
};

}  // namespace detail

/// Dense row-major tensor that records the operations producing it, so a
/// scalar result can be differentiated with backward(). Copies share the
/// underlying node.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;
  using NodePtr = std::shared_ptr<detail::Node<Real>>;

  Tensor();
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values,
                     bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const Real> data() const { return node_->value; }
  /// Mutable access; only meaningful for leaves (parameters, inputs).
  std::span<Real> mutable_data() { return node_->value; }
  /// Gradient accumulated by backward(); empty span if none was produced.
  std::span<const Real> grad() const { return node_->grad; }
  std::span<Real> mutable_grad() { return {node_->grad_buffer(), numel()}; }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  Real item() const;
  Real at(std::size_t i) const { return node_->value[i]; }

  /// Leaf copy of the values, cut from the graph.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

struct BackwardStats {
  std::size_t nodes_visited = 0;
};

/// Reverse-mode sweep from a scalar. Every node reachable through
/// requires_grad edges is visited exactly once.
template <typename Real>
BackwardStats backward(const Tensor<Real>& loss);

namespace ops {

// Elementwise with numpy-style broadcasting (trailing alignment, size-1
// dims expand).
template <typename Real> Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real> Tensor<Real> scale(const Tensor<Real>& x, Real factor);
template <typename Real> Tensor<Real> relu(const Tensor<Real>& x);
template <typename Real> Tensor<Real> sigmoid(const Tensor<Real>& x);
template <typename Real> Tensor<Real> exp(const Tensor<Real>& x);
template <typename Real> Tensor<Real> log(const Tensor<Real>& x);

/// (..., m, k) x (..., k, n). The right operand may be 2-D and is then shared
/// across the leading batch dims.
template <typename Real> Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);

/// x (..., in) . weight (in, out) + bias (out). bias may be empty.
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight,
                    const Tensor<Real>& bias);

/// x (B, C, H, W) or (C, H, W); kernels (O, C, kh, kw); bias (O) or empty.
/// Zero padding.
template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& x, const Tensor<Real>& kernels,
                    const Tensor<Real>& bias, std::size_t stride,
                    std::size_t pad);

enum class PoolKind { avg, max, global_avg };

/// Windowed pooling without padding. global_avg maps (B, C, H, W) to (B, C)
/// and (C, H, W) to (C). Max-pool gradients go to the first maximum.
template <typename Real>
Tensor<Real> pool2d(const Tensor<Real>& x, PoolKind kind, std::size_t k = 2,
                    std::size_t stride = 2);

/// Max-subtracted softmax along an axis.
template <typename Real> Tensor<Real> softmax(const Tensor<Real>& x, std::size_t axis);

/// Normalises the last axis (eps 1e-5) then applies gain and bias.
template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain,
                        const Tensor<Real>& bias);

/// Mean over the batch of -log softmax(logits)[label]; logits (B, K).
template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, std::span<const int> labels);

/// Straight-through Gumbel-softmax over the last axis. Forward is the one-hot
/// argmax of (logits + G) / tau; backward is the gradient of
/// softmax((logits + G) / tau). If `soft_out` is given it receives the
/// relaxed probabilities.
template <typename Real>
Tensor<Real> gumbel_softmax_st(const Tensor<Real>& logits, Real tau,
                               CounterRng& rng,
                               std::vector<Real>* soft_out = nullptr);

template <typename Real> Tensor<Real> reshape(const Tensor<Real>& x, Shape shape);
template <typename Real>
Tensor<Real> permute(const Tensor<Real>& x, const std::vector<std::size_t>& perm);
template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& xs, std::size_t axis);
/// Stacks equally shaped tensors along a new axis.
template <typename Real>
Tensor<Real> stack(const std::vector<Tensor<Real>>& xs, std::size_t axis);
/// Keeps [begin, end) along an axis.
template <typename Real>
Tensor<Real> slice(const Tensor<Real>& x, std::size_t axis, std::size_t begin,
                   std::size_t end);
/// Picks one index along an axis and drops that axis.
template <typename Real>
Tensor<Real> select(const Tensor<Real>& x, std::size_t axis, std::size_t index);

template <typename Real> Tensor<Real> sum(const Tensor<Real>& x);
template <typename Real> Tensor<Real> mean(const Tensor<Real>& x);
/// Mean along one axis; the axis is removed.
template <typename Real> Tensor<Real> mean_axis(const Tensor<Real>& x, std::size_t axis);

}  // namespace ops

}  // namespace addlab

#endif  // ADDLAB_TENSOR_HPP
