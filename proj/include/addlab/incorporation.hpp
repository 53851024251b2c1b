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

#ifndef ADDLAB_INCORPORATION_HPP
#define ADDLAB_INCORPORATION_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "addlab/nn.hpp"
#include "addlab/rng.hpp"
#include "addlab/tensor.hpp"

namespace addlab {

/// Declared geometry of one feature view.
struct ViewSpec {
  std::string name;
  std::size_t dim = 0;     // D_i
  std::size_t frames = 0;  // T_i
  double frame_rate = 0.0;
};

/// N candidate views for one batch; view i is (B, T_i, D_i).
template <typename Real>
struct MultiViewBatch {
  std::vector<Tensor<Real>> views;
  std::vector<std::string> names;

  std::size_t batch_size() const { return views.empty() ? 0 : views[0].dim(0); }
  void validate() const;
};

/// (T_out x T_in) linear-interpolation matrix with endpoints aligned.
std::vector<double> interpolation_matrix(std::size_t t_in, std::size_t t_out);

/// Common frame count after alignment: the smallest T_i.
std::size_t common_frames(const std::vector<ViewSpec>& views);

/// Time-aligns every view to the common frame count and projects it to
/// d_proj with a per-view learned linear map.
template <typename Real>
struct ViewAligner {
  std::vector<nn::Linear<Real>> proj;
  std::vector<Tensor<Real>> interp;  // (T_i, T) or empty when T_i == T
  std::size_t frames = 0;
  std::size_t d_proj = 0;

  ViewAligner() = default;
  ViewAligner(const std::vector<ViewSpec>& views, std::size_t d_proj,
              CounterRng& rng);

  /// Returns N tensors of shape (B, T, d_proj).
  std::vector<Tensor<Real>> operator()(const MultiViewBatch<Real>& batch) const;
  void collect(nn::ParameterSet<Real>& ps, const std::string& prefix) const;
};

/// Stacks aligned views on a channel axis: (B, N, T, d).
template <typename Real>
Tensor<Real> concat_views(const std::vector<Tensor<Real>>& aligned);

enum class GateMode {
  sample,      // Gumbel-max draw, straight-through gradient (training)
  argmax,      // noiseless decision (inference)
  force_keep,  // every gate 1
};

template <typename Real>
struct Selection {
  Tensor<Real> features;  // (B, N, T, d)
  Tensor<Real> masks;     // (B, N), entries in {0, 1}
};

/// Per-view binary gate m_i from the selection head; features are
/// stack_i(f_i * m_i). With one head in `heads` it is shared by all views.
template <typename Real>
Selection<Real> select_features(const std::vector<Tensor<Real>>& aligned,
                                const std::vector<nn::SelectionHead<Real>>& heads,
                                GateMode mode, Real tau, CounterRng* rng);

/// Channel attention across views followed by axial Transformer encoding:
/// te_layers along time, then te_layers across per-view chunks.
template <typename Real>
struct FusionHead {
  nn::ChannelAttention<Real> ca;
  std::vector<nn::TransformerEncoderLayer<Real>> time_layers;
  std::vector<nn::TransformerEncoderLayer<Real>> view_layers;
  std::size_t views = 0;
  std::size_t d_proj = 0;

  FusionHead() = default;
  FusionHead(std::size_t n_views, const nn::FusionHeadConfig& cfg, CounterRng& rng);

  /// stacked (B, N, T, d) -> (B, T, N * d).
  Tensor<Real> operator()(const Tensor<Real>& stacked,
                          bool unit_channel_weights = false) const;
  void collect(nn::ParameterSet<Real>& ps, const std::string& prefix) const;
  void zero_encoder_outputs();
};

template <typename Real>
Tensor<Real> fuse_features(const std::vector<Tensor<Real>>& aligned,
                           const FusionHead<Real>& head,
                           bool unit_channel_weights = false);

}  // namespace addlab

#endif  // ADDLAB_INCORPORATION_HPP
