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

#include "addlab/incorporation.hpp"

#include <algorithm>

#include "addlab/error.hpp"

namespace addlab {

template <typename Real>
void MultiViewBatch<Real>::validate() const {
  if (views.empty())
    fail(Status::usage, Reason::shape, "multi-view batch has no views");
  const std::size_t b = views[0].rank() == 3 ? views[0].dim(0) : 0;
  for (const auto& v : views)
    if (v.rank() != 3 || v.dim(0) != b)
      shape_error("every view must be (B, T_i, D_i) with a common B");
}

std::vector<double> interpolation_matrix(std::size_t t_in, std::size_t t_out) {
  if (t_in < 2 || t_out < 1) shape_error("interpolation needs T_in >= 2");
  std::vector<double> m(t_out * t_in, 0.0);
  for (std::size_t t = 0; t < t_out; ++t) {
    const double pos = t_out == 1 ? 0.0
                                  : static_cast<double>(t) * (t_in - 1) / (t_out - 1);
    auto lo = static_cast<std::size_t>(pos);
    if (lo >= t_in - 1) lo = t_in - 2;
    const double frac = pos - static_cast<double>(lo);
    m[t * t_in + lo] += 1.0 - frac;
    m[t * t_in + lo + 1] += frac;
  }
  return m;
}

std::size_t common_frames(const std::vector<ViewSpec>& views) {
  if (views.empty()) fail(Status::usage, Reason::shape, "empty view list");
  std::size_t t = views[0].frames;
  for (const auto& v : views) t = std::min(t, v.frames);
  return t;
}

template <typename Real>
ViewAligner<Real>::ViewAligner(const std::vector<ViewSpec>& views,
                               std::size_t d_proj_, CounterRng& rng)
    : frames(common_frames(views)), d_proj(d_proj_) {
  for (const auto& v : views) {
    if (v.frames < 2)
      shape_error("view '" + v.name + "' needs at least 2 frames to align");
    proj.emplace_back(v.dim, d_proj, rng);
    if (v.frames == frames) {
      interp.emplace_back();
    } else {
      // Stored transposed, (T_i, T), so it right-multiplies (B, D_i, T_i).
      const auto m = interpolation_matrix(v.frames, frames);
      std::vector<Real> mt(v.frames * frames);
      for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t s = 0; s < v.frames; ++s)
          mt[s * frames + t] = static_cast<Real>(m[t * v.frames + s]);
      interp.push_back(Tensor<Real>::from({v.frames, frames}, std::move(mt)));
    }
  }
}

template <typename Real>
std::vector<Tensor<Real>> ViewAligner<Real>::operator()(
    const MultiViewBatch<Real>& batch) const {
  batch.validate();
  if (batch.views.size() != proj.size())
    shape_error("aligner built for " + std::to_string(proj.size()) +
                " views, got " + std::to_string(batch.views.size()));
  std::vector<Tensor<Real>> out;
  out.reserve(proj.size());
  for (std::size_t i = 0; i < proj.size(); ++i) {
    Tensor<Real> x = batch.views[i];
    if (interp[i].numel() > 0) {
      if (x.dim(1) != interp[i].dim(0))
        shape_error("view " + std::to_string(i) + " has " +
                    std::to_string(x.dim(1)) + " frames, expected " +
                    std::to_string(interp[i].dim(0)));
      x = ops::permute(ops::matmul(ops::permute(x, {0, 2, 1}), interp[i]), {0, 2, 1});
    } else if (x.dim(1) != frames) {
      shape_error("view " + std::to_string(i) + " has " + std::to_string(x.dim(1)) +
                  " frames, expected " + std::to_string(frames));
    }
    out.push_back(proj[i](x));
  }
  return out;
}

template <typename Real>
void ViewAligner<Real>::collect(nn::ParameterSet<Real>& ps,
                                const std::string& prefix) const {
  for (std::size_t i = 0; i < proj.size(); ++i)
    proj[i].collect(ps, prefix + ".proj" + std::to_string(i));
}

template <typename Real>
Tensor<Real> concat_views(const std::vector<Tensor<Real>>& aligned) {
  if (aligned.empty()) fail(Status::usage, Reason::shape, "concat of zero views");
  return ops::stack(aligned, 1);
}

template <typename Real>
Selection<Real> select_features(const std::vector<Tensor<Real>>& aligned,
                                const std::vector<nn::SelectionHead<Real>>& heads,
                                GateMode mode, Real tau, CounterRng* rng) {
  if (aligned.empty()) fail(Status::usage, Reason::shape, "selection over zero views");
  if (mode != GateMode::force_keep && heads.size() != 1 && heads.size() != aligned.size())
    fail(Status::usage, Reason::shape, "need one selection head per view (or one shared)");
  if (mode == GateMode::sample && rng == nullptr)
    fail(Status::usage, Reason::parameter, "sampled gates need an rng");
  const std::size_t B = aligned[0].dim(0);
  std::vector<Tensor<Real>> gated, masks;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    Tensor<Real> m;
    if (mode == GateMode::force_keep) {
      m = Tensor<Real>::full({B}, Real(1));
    } else {
      const auto& head = heads.size() == 1 ? heads[0] : heads[i];
      auto logits = head(aligned[i]);
      if (mode == GateMode::sample) {
        m = ops::select(ops::gumbel_softmax_st(logits, tau, *rng), 1, 0);
      } else {
        std::vector<Real> v(B);
        for (std::size_t b = 0; b < B; ++b)
          v[b] = logits.at(b * 2) >= logits.at(b * 2 + 1) ? Real(1) : Real(0);
        m = Tensor<Real>::from({B}, std::move(v));
      }
    }
    gated.push_back(ops::mul(aligned[i], ops::reshape(m, Shape{B, 1, 1})));
    masks.push_back(m.detach());
  }
  return {ops::stack(gated, 1), ops::stack(masks, 1)};
}

template <typename Real>
FusionHead<Real>::FusionHead(std::size_t n_views, const nn::FusionHeadConfig& cfg,
                             CounterRng& rng)
    : views(n_views), d_proj(cfg.proj_dim) {
  cfg.validate();
  if (n_views == 0) fail(Status::usage, Reason::shape, "fusion over zero views");
  ca = nn::ChannelAttention<Real>(n_views, std::min(cfg.se_reduction, n_views), rng);
  for (std::size_t i = 0; i < cfg.te_layers; ++i)
    time_layers.emplace_back(n_views * cfg.proj_dim, cfg.te_heads, cfg.te_ff_dim, rng);
  for (std::size_t i = 0; i < cfg.te_layers; ++i)
    view_layers.emplace_back(cfg.proj_dim, cfg.te_heads, cfg.te_ff_dim, rng);
}

template <typename Real>
Tensor<Real> FusionHead<Real>::operator()(const Tensor<Real>& stacked,
                                          bool unit_channel_weights) const {
  if (stacked.rank() != 4 || stacked.dim(1) != views || stacked.dim(3) != d_proj)
    shape_error("fusion expects (B, " + std::to_string(views) + ", T, " +
                std::to_string(d_proj) + "), got " + to_string(stacked.shape()));
  const std::size_t B = stacked.dim(0), T = stacked.dim(2);
  auto r = ca(stacked, unit_channel_weights).y;
  auto h = ops::reshape(ops::permute(r, {0, 2, 1, 3}), Shape{B, T, views * d_proj});
  for (const auto& layer : time_layers) h = layer(h);
  if (!view_layers.empty()) {
    h = ops::reshape(h, Shape{B * T, views, d_proj});
    for (const auto& layer : view_layers) h = layer(h);
    h = ops::reshape(h, Shape{B, T, views * d_proj});
  }
  return h;
}

template <typename Real>
void FusionHead<Real>::collect(nn::ParameterSet<Real>& ps,
                               const std::string& prefix) const {
  ca.collect(ps, prefix + ".ca");
  for (std::size_t i = 0; i < time_layers.size(); ++i)
    time_layers[i].collect(ps, prefix + ".time" + std::to_string(i));
  for (std::size_t i = 0; i < view_layers.size(); ++i)
    view_layers[i].collect(ps, prefix + ".view" + std::to_string(i));
}

template <typename Real>
void FusionHead<Real>::zero_encoder_outputs() {
  for (auto& l : time_layers) l.zero_output_projections();
  for (auto& l : view_layers) l.zero_output_projections();
}

template <typename Real>
Tensor<Real> fuse_features(const std::vector<Tensor<Real>>& aligned,
                           const FusionHead<Real>& head, bool unit_channel_weights) {
  return head(concat_views(aligned), unit_channel_weights);
}

#define ADDLAB_INSTANTIATE(R)                                                   \
  template struct MultiViewBatch<R>;                                            \
  template struct ViewAligner<R>;                                               \
  template struct FusionHead<R>;                                                \
  template Tensor<R> concat_views(const std::vector<Tensor<R>>&);               \
  template Selection<R> select_features(const std::vector<Tensor<R>>&,          \
                                        const std::vector<nn::SelectionHead<R>>&, \
                                        GateMode, R, CounterRng*);              \
  template Tensor<R> fuse_features(const std::vector<Tensor<R>>&,               \
                                   const FusionHead<R>&, bool);

ADDLAB_INSTANTIATE(float)
ADDLAB_INSTANTIATE(double)

#undef ADDLAB_INSTANTIATE

}  // namespace addlab
