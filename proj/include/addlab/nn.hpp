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

#ifndef ADDLAB_NN_HPP
#define ADDLAB_NN_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "addlab/rng.hpp"
#include "addlab/tensor.hpp"

namespace addlab::nn {

/// Ordered (name, leaf tensor) list; the order is the serialisation order.
template <typename Real>
class ParameterSet {
 public:
  void add(std::string name, Tensor<Real> t) {
    items_.emplace_back(std::move(name), std::move(t));
  }
  const std::vector<std::pair<std::string, Tensor<Real>>>& items() const {
    return items_;
  }
  std::vector<std::pair<std::string, Tensor<Real>>>& items() { return items_; }
  std::size_t count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor<Real>>> items_;
};

template <typename Real>
struct Linear {
  Tensor<Real> weight;  // (in, out)
  Tensor<Real> bias;    // (out) or empty

  Linear() = default;
  Linear(std::size_t in, std::size_t out, CounterRng& rng, bool with_bias = true);

  Tensor<Real> operator()(const Tensor<Real>& x) const {
    return ops::linear(x, weight, bias);
  }
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
  void set_zero();
};

template <typename Real>
struct Conv2d {
  Tensor<Real> weight;  // (O, C, k, k)
  Tensor<Real> bias;    // (O)
  std::size_t stride = 1;
  std::size_t pad = 0;

  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
         std::size_t pad, CounterRng& rng, double gain = 1.0);

  Tensor<Real> operator()(const Tensor<Real>& x) const {
    return ops::conv2d(x, weight, bias, stride, pad);
  }
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
  void set_zero();
};

template <typename Real>
struct LayerNorm {
  Tensor<Real> gain;
  Tensor<Real> bias;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t d);

  Tensor<Real> operator()(const Tensor<Real>& x) const {
    return ops::layer_norm(x, gain, bias);
  }
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
};

/// Scaled dot-product self-attention, scale 1/sqrt(d/heads), no mask and no
/// positional encoding.
template <typename Real>
struct MultiHeadSelfAttention {
  Linear<Real> q, k, v, o;
  std::size_t heads = 1;

  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(std::size_t d, std::size_t heads, CounterRng& rng);

  /// x (B, T, d). If `weights` is given it receives the (B, heads, T, T)
  /// attention matrix.
  Tensor<Real> operator()(const Tensor<Real>& x,
                          Tensor<Real>* weights = nullptr) const;
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
};

/// Pre-norm encoder layer: x + MHSA(LN(x)), then + FFN(LN(.)).
template <typename Real>
struct TransformerEncoderLayer {
  LayerNorm<Real> ln1, ln2;
  MultiHeadSelfAttention<Real> attn;
  Linear<Real> ff1, ff2;

  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(std::size_t d, std::size_t heads, std::size_t ff_dim,
                          CounterRng& rng);

  Tensor<Real> operator()(const Tensor<Real>& x) const;
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
  /// Zeroes both residual-branch output projections; the layer becomes the
  /// identity.
  void zero_output_projections();
};

/// Squeeze-excitation over the channel axis of (B, C, D, T).
template <typename Real>
struct ChannelAttention {
  Linear<Real> fc1, fc2;

  struct Output {
    Tensor<Real> weights;  // (B, C), each in (0, 1)
    Tensor<Real> y;        // x scaled per channel
  };

  ChannelAttention() = default;
  ChannelAttention(std::size_t channels, std::size_t reduction, CounterRng& rng);

  /// With `unit_weights` the excitation is bypassed and every weight is 1.
  Output operator()(const Tensor<Real>& x, bool unit_weights = false) const;
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
  void set_zero();
};

struct SelectionHeadConfig {
  std::size_t attn_dim = 64;
  std::size_t n_layers = 1;
  std::size_t n_heads = 2;
  double keep_bias_init = 0.0;  // keep-logit offset; 0 starts every gate at 1/2

  void validate() const;
};

/// Gate network for one view: projection to attn_dim, self-attention layers,
/// mean over time, linear to (keep, drop) logits.
template <typename Real>
struct SelectionHead {
  Linear<Real> in_proj;
  std::vector<LayerNorm<Real>> norms;
  std::vector<MultiHeadSelfAttention<Real>> layers;
  Linear<Real> out;

  SelectionHead() = default;
  SelectionHead(std::size_t d_in, const SelectionHeadConfig& cfg, CounterRng& rng);

  /// x (B, T, d_in) -> logits (B, 2).
  Tensor<Real> operator()(const Tensor<Real>& x) const;
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
};

struct FusionHeadConfig {
  std::size_t proj_dim = 128;
  std::size_t se_reduction = 4;
  std::size_t te_layers = 2;
  std::size_t te_heads = 4;
  std::size_t te_ff_dim = 256;

  void validate() const;
};

struct ResidualCnnConfig {
  std::vector<std::size_t> stage_blocks{2, 2, 2, 2};
  std::size_t base_channels = 64;
  std::size_t num_classes = 2;
  std::size_t in_channels = 1;

  static ResidualCnnConfig toy(std::size_t in_channels = 1) {
    return {{1, 1}, 8, 2, in_channels};
  }
  void validate() const;
};

/// Two 3x3 convolutions plus skip; 1x1 strided projection on the skip when
/// the geometry changes. No normalisation layers.
template <typename Real>
struct ResidualBlock {
  Conv2d<Real> conv1, conv2;
  Conv2d<Real> shortcut;
  bool has_shortcut = false;

  ResidualBlock() = default;
  ResidualBlock(std::size_t in, std::size_t out, std::size_t stride,
                CounterRng& rng, double residual_gain);

  Tensor<Real> operator()(const Tensor<Real>& x) const;
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
};

/// ResNet-style classifier: 7x7/2 stem, stages of basic blocks with stride-2
/// between stages and doubling channels, global average pool, linear head.
template <typename Real>
struct ResidualCnn {
  ResidualCnnConfig config;
  Conv2d<Real> stem;
  std::vector<ResidualBlock<Real>> blocks;
  Linear<Real> fc;

  ResidualCnn() = default;
  ResidualCnn(const ResidualCnnConfig& cfg, CounterRng& rng);

  /// x (B, C, D, T) -> logits (B, num_classes).
  Tensor<Real> operator()(const Tensor<Real>& x) const;
  void collect(ParameterSet<Real>& ps, const std::string& prefix) const;
};

}  // namespace addlab::nn

#endif  // ADDLAB_NN_HPP
