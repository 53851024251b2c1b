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

#include "addlab/nn.hpp"

#include <cmath>

#include "addlab/error.hpp"

namespace addlab::nn {

namespace {

template <typename Real>
Tensor<Real> uniform_param(Shape shape, double bound, CounterRng& rng) {
  std::vector<Real> v(numel(shape));
  for (auto& x : v) x = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
  return Tensor<Real>::from(std::move(shape), std::move(v), true);
}

template <typename Real>
void fill(Tensor<Real>& t, Real value) {
  for (auto& x : t.mutable_data()) x = value;
}

}  // namespace

template <typename Real>
std::size_t ParameterSet<Real>::count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

template <typename Real>
void ParameterSet<Real>::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

template <typename Real>
Linear<Real>::Linear(std::size_t in, std::size_t out, CounterRng& rng,
                     bool with_bias) {
  if (in == 0 || out == 0) parameter_error("linear layer with zero width");
  weight = uniform_param<Real>({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  if (with_bias) bias = Tensor<Real>::zeros({out}, true);
}

template <typename Real>
void Linear<Real>::collect(ParameterSet<Real>& ps, const std::string& prefix) const {
  ps.add(prefix + ".weight", weight);
  if (bias.numel() > 0) ps.add(prefix + ".bias", bias);
}

template <typename Real>
void Linear<Real>::set_zero() {
  fill(weight, Real(0));
  if (bias.numel() > 0) fill(bias, Real(0));
}

template <typename Real>
Conv2d<Real>::Conv2d(std::size_t in, std::size_t out, std::size_t k,
                     std::size_t stride_, std::size_t pad_, CounterRng& rng,
                     double gain)
    : stride(stride_), pad(pad_) {
  const double fan_in = static_cast<double>(in * k * k);
  weight = uniform_param<Real>({out, in, k, k}, gain * std::sqrt(6.0 / fan_in), rng);
  bias = Tensor<Real>::zeros({out}, true);
}

template <typename Real>
void Conv2d<Real>::collect(ParameterSet<Real>& ps, const std::string& prefix) const {
  ps.add(prefix + ".weight", weight);
  ps.add(prefix + ".bias", bias);
}

template <typename Real>
void Conv2d<Real>::set_zero() {
  fill(weight, Real(0));
  fill(bias, Real(0));
}

template <typename Real>
LayerNorm<Real>::LayerNorm(std::size_t d)
    : gain(Tensor<Real>::full({d}, Real(1), true)),
      bias(Tensor<Real>::zeros({d}, true)) {}

template <typename Real>
void LayerNorm<Real>::collect(ParameterSet<Real>& ps, const std::string& prefix) const {
  ps.add(prefix + ".gain", gain);
  ps.add(prefix + ".bias", bias);
}

template <typename Real>
MultiHeadSelfAttention<Real>::MultiHeadSelfAttention(std::size_t d,
                                                     std::size_t heads_,
                                                     CounterRng& rng)
    : heads(heads_) {
  if (heads == 0 || d % heads != 0)
    parameter_error("attention width " + std::to_string(d) +
                    " not divisible by " + std::to_string(heads) + " heads");
  q = Linear<Real>(d, d, rng);
  k = Linear<Real>(d, d, rng);
  v = Linear<Real>(d, d, rng);
  o = Linear<Real>(d, d, rng);
}

template <typename Real>
Tensor<Real> MultiHeadSelfAttention<Real>::operator()(const Tensor<Real>& x,
                                                      Tensor<Real>* weights) const {
  if (x.rank() != 3) shape_error("attention input must be (B, T, d), got " +
                                 to_string(x.shape()));
  const std::size_t B = x.dim(0), T = x.dim(1), d = x.dim(2);
  if (d != q.weight.dim(0))
    shape_error("attention width " + std::to_string(d) + " vs layer " +
                std::to_string(q.weight.dim(0)));
  const std::size_t dk = d / heads;
  const Shape split{B, T, heads, dk};
  auto qh = ops::permute(ops::reshape(q(x), split), {0, 2, 1, 3});
  auto kt = ops::permute(ops::reshape(k(x), split), {0, 2, 3, 1});
  auto vh = ops::permute(ops::reshape(v(x), split), {0, 2, 1, 3});
  auto scores = ops::scale(ops::matmul(qh, kt),
                           static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dk))));
  auto attn = ops::softmax(scores, 3);
  if (weights) *weights = attn;
  auto ctx = ops::permute(ops::matmul(attn, vh), {0, 2, 1, 3});
  return o(ops::reshape(ctx, Shape{B, T, d}));
}

template <typename Real>
void MultiHeadSelfAttention<Real>::collect(ParameterSet<Real>& ps,
                                           const std::string& prefix) const {
  q.collect(ps, prefix + ".q");
  k.collect(ps, prefix + ".k");
  v.collect(ps, prefix + ".v");
  o.collect(ps, prefix + ".o");
}

template <typename Real>
TransformerEncoderLayer<Real>::TransformerEncoderLayer(std::size_t d,
                                                       std::size_t heads,
                                                       std::size_t ff_dim,
                                                       CounterRng& rng)
    : ln1(d), ln2(d), attn(d, heads, rng), ff1(d, ff_dim, rng), ff2(ff_dim, d, rng) {}

template <typename Real>
Tensor<Real> TransformerEncoderLayer<Real>::operator()(const Tensor<Real>& x) const {
  auto h = ops::add(x, attn(ln1(x)));
  return ops::add(h, ff2(ops::relu(ff1(ln2(h)))));
}

template <typename Real>
void TransformerEncoderLayer<Real>::collect(ParameterSet<Real>& ps,
                                            const std::string& prefix) const {
  ln1.collect(ps, prefix + ".ln1");
  attn.collect(ps, prefix + ".attn");
  ln2.collect(ps, prefix + ".ln2");
  ff1.collect(ps, prefix + ".ff1");
  ff2.collect(ps, prefix + ".ff2");
}

template <typename Real>
void TransformerEncoderLayer<Real>::zero_output_projections() {
  attn.o.set_zero();
  ff2.set_zero();
}

template <typename Real>
ChannelAttention<Real>::ChannelAttention(std::size_t channels,
                                         std::size_t reduction, CounterRng& rng) {
  if (reduction == 0 || channels < reduction)
    parameter_error("channel attention needs channels (" +
                    std::to_string(channels) + ") >= reduction (" +
                    std::to_string(reduction) + ")");
  const std::size_t hidden = channels / reduction;
  fc1 = Linear<Real>(channels, hidden, rng);
  fc2 = Linear<Real>(hidden, channels, rng);
}

template <typename Real>
typename ChannelAttention<Real>::Output ChannelAttention<Real>::operator()(
    const Tensor<Real>& x, bool unit_weights) const {
  if (x.rank() != 4) shape_error("channel attention input must be (B, C, D, T)");
  const std::size_t B = x.dim(0), C = x.dim(1);
  if (C != fc1.weight.dim(0))
    shape_error("channel attention built for " +
                std::to_string(fc1.weight.dim(0)) + " channels, got " +
                std::to_string(C));
  if (unit_weights) return {Tensor<Real>::full({B, C}, Real(1)), x};
  auto squeeze = ops::mean_axis(ops::reshape(x, Shape{B, C, x.dim(2) * x.dim(3)}), 2);
  auto w = ops::sigmoid(fc2(ops::relu(fc1(squeeze))));
  auto y = ops::mul(x, ops::reshape(w, Shape{B, C, 1, 1}));
  return {w, y};
}

template <typename Real>
void ChannelAttention<Real>::collect(ParameterSet<Real>& ps,
                                     const std::string& prefix) const {
  fc1.collect(ps, prefix + ".fc1");
  fc2.collect(ps, prefix + ".fc2");
}

template <typename Real>
void ChannelAttention<Real>::set_zero() {
  fc1.set_zero();
  fc2.set_zero();
}

void SelectionHeadConfig::validate() const {
  if (attn_dim == 0 || n_heads == 0 || attn_dim % n_heads != 0)
    parameter_error("selection attn_dim must be divisible by n_heads");
}

void FusionHeadConfig::validate() const {
  if (proj_dim == 0 || te_heads == 0 || proj_dim % te_heads != 0)
    parameter_error("fusion proj_dim must be divisible by te_heads");
  if (te_ff_dim == 0 || se_reduction == 0)
    parameter_error("fusion te_ff_dim and se_reduction must be positive");
}

void ResidualCnnConfig::validate() const {
  if (stage_blocks.empty()) parameter_error("stage_blocks must be non-empty");
  for (auto b : stage_blocks)
    if (b == 0) parameter_error("every stage needs at least one block");
  if (base_channels == 0 || num_classes < 2 || in_channels == 0)
    parameter_error("invalid classifier widths");
}

template <typename Real>
SelectionHead<Real>::SelectionHead(std::size_t d_in, const SelectionHeadConfig& cfg,
                                   CounterRng& rng) {
  cfg.validate();
  in_proj = Linear<Real>(d_in, cfg.attn_dim, rng);
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    norms.emplace_back(cfg.attn_dim);
    layers.emplace_back(cfg.attn_dim, cfg.n_heads, rng);
  }
  // Zero weights: a fresh head emits exactly (keep_bias_init, 0), so with the
  // default offset every gate starts as a fair coin and training alone
  // decides which views earn a higher keep rate.
  out = Linear<Real>(cfg.attn_dim, 2, rng);
  out.set_zero();
  out.bias.mutable_data()[0] = static_cast<Real>(cfg.keep_bias_init);
}

template <typename Real>
Tensor<Real> SelectionHead<Real>::operator()(const Tensor<Real>& x) const {
  auto h = in_proj(x);
  for (std::size_t i = 0; i < layers.size(); ++i)
    h = ops::add(h, layers[i](norms[i](h)));
  return out(ops::mean_axis(h, 1));
}

template <typename Real>
void SelectionHead<Real>::collect(ParameterSet<Real>& ps,
                                  const std::string& prefix) const {
  in_proj.collect(ps, prefix + ".in_proj");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    norms[i].collect(ps, prefix + ".norm" + std::to_string(i));
    layers[i].collect(ps, prefix + ".attn" + std::to_string(i));
  }
  out.collect(ps, prefix + ".out");
}

template <typename Real>
ResidualBlock<Real>::ResidualBlock(std::size_t in, std::size_t out,
                                   std::size_t stride, CounterRng& rng,
                                   double residual_gain)
    : conv1(in, out, 3, stride, 1, rng),
      conv2(out, out, 3, 1, 1, rng, residual_gain) {
  if (stride != 1 || in != out) {
    shortcut = Conv2d<Real>(in, out, 1, stride, 0, rng);
    has_shortcut = true;
  }
}

template <typename Real>
Tensor<Real> ResidualBlock<Real>::operator()(const Tensor<Real>& x) const {
  auto h = conv2(ops::relu(conv1(x)));
  return ops::relu(ops::add(h, has_shortcut ? shortcut(x) : x));
}

template <typename Real>
void ResidualBlock<Real>::collect(ParameterSet<Real>& ps,
                                  const std::string& prefix) const {
  conv1.collect(ps, prefix + ".conv1");
  conv2.collect(ps, prefix + ".conv2");
  if (has_shortcut) shortcut.collect(ps, prefix + ".shortcut");
}

template <typename Real>
ResidualCnn<Real>::ResidualCnn(const ResidualCnnConfig& cfg, CounterRng& rng)
    : config(cfg) {
  cfg.validate();
  stem = Conv2d<Real>(cfg.in_channels, cfg.base_channels, 7, 2, 3, rng);
  std::size_t total = 0;
  for (auto b : cfg.stage_blocks) total += b;
  const double gain = 1.0 / std::sqrt(static_cast<double>(total));
  std::size_t channels = cfg.base_channels;
  for (std::size_t s = 0; s < cfg.stage_blocks.size(); ++s) {
    const std::size_t out = cfg.base_channels << s;
    for (std::size_t b = 0; b < cfg.stage_blocks[s]; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      blocks.emplace_back(channels, out, stride, rng, gain);
      channels = out;
    }
  }
  fc = Linear<Real>(channels, cfg.num_classes, rng);
}

template <typename Real>
Tensor<Real> ResidualCnn<Real>::operator()(const Tensor<Real>& x) const {
  if (x.rank() != 4 || x.dim(1) != config.in_channels)
    shape_error("classifier expects (B, " + std::to_string(config.in_channels) +
                ", D, T), got " + to_string(x.shape()));
  const std::size_t h = (x.dim(2) + 6 - 7) / 2 + 1;
  const std::size_t w = (x.dim(3) + 6 - 7) / 2 + 1;
  if (x.dim(2) < 7 || x.dim(3) < 7 || h < 8 || w < 8)
    shape_error("input " + to_string(x.shape()) +
                " too small for the downsampling chain (need >= 8x8 after stem)");
  auto y = ops::relu(stem(x));
  for (const auto& blk : blocks) y = blk(y);
  return fc(ops::pool2d(y, ops::PoolKind::global_avg));
}

template <typename Real>
void ResidualCnn<Real>::collect(ParameterSet<Real>& ps,
                                const std::string& prefix) const {
  stem.collect(ps, prefix + ".stem");
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(ps, prefix + ".block" + std::to_string(i));
  fc.collect(ps, prefix + ".fc");
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct Conv2d<float>;
template struct Conv2d<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct MultiHeadSelfAttention<float>;
template struct MultiHeadSelfAttention<double>;
template struct TransformerEncoderLayer<float>;
template struct TransformerEncoderLayer<double>;
template struct ChannelAttention<float>;
template struct ChannelAttention<double>;
template struct SelectionHead<float>;
template struct SelectionHead<double>;
template struct ResidualBlock<float>;
template struct ResidualBlock<double>;
template struct ResidualCnn<float>;
template struct ResidualCnn<double>;

}  // namespace addlab::nn
