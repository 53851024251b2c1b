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

#include "addlab/model.hpp"

#include "addlab/error.hpp"

namespace addlab {

const char* mode_name(Mode m) noexcept {
  switch (m) {
    case Mode::single: return "single";
    case Mode::concat: return "concat";
    case Mode::select: return "select";
    case Mode::fuse: return "fuse";
  }
  return "single";
}

Mode parse_mode(const std::string& s) {
  if (s == "single") return Mode::single;
  if (s == "concat") return Mode::concat;
  if (s == "select") return Mode::select;
  if (s == "fuse") return Mode::fuse;
  fail(Status::usage, Reason::parameter,
       "unknown mode '" + s + "' (expected single, concat, select or fuse)");
}

void ModelConfig::validate() const {
  if (views.empty()) fail(Status::usage, Reason::parameter, "model needs at least one view");
  if (mode == Mode::single && views.size() != 1)
    fail(Status::usage, Reason::parameter,
         "single mode takes exactly one view, got " + std::to_string(views.size()));
  for (const auto& v : views)
    if (v.dim == 0 || v.frames < 2)
      fail(Status::data, Reason::shape,
           "view '" + v.name + "' needs dim >= 1 and at least 2 frames");
  cnn.validate();
  if (mode == Mode::select) selection.validate();
  if (mode == Mode::fuse) fusion.validate();
  if (fusion.proj_dim == 0) fail(Status::usage, Reason::parameter, "proj_dim must be positive");
}

std::size_t ModelConfig::classifier_channels() const {
  return mode == Mode::single ? 1 : views.size();
}

template <typename Real>
Detector<Real>::Detector(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.cnn.in_channels = cfg_.classifier_channels();
  cfg_.validate();
  // Separate streams keep each component's init independent of the others,
  // so toggling the mode never perturbs the classifier's initial weights.
  CounterRng root(seed, 0x6d6f64656cULL);
  if (cfg_.mode != Mode::single) {
    CounterRng r = root.fork(1);
    aligner_ = ViewAligner<Real>(cfg_.views, cfg_.fusion.proj_dim, r);
  }
  if (cfg_.mode == Mode::select) {
    CounterRng r = root.fork(2);
    const std::size_t n = cfg_.share_selection ? 1 : cfg_.views.size();
    for (std::size_t i = 0; i < n; ++i)
      selectors_.emplace_back(cfg_.fusion.proj_dim, cfg_.selection, r);
  }
  if (cfg_.mode == Mode::fuse) {
    CounterRng r = root.fork(3);
    fusion_ = FusionHead<Real>(cfg_.views.size(), cfg_.fusion, r);
  }
  CounterRng r = root.fork(4);
  cnn_ = nn::ResidualCnn<Real>(cfg_.cnn, r);
}

template <typename Real>
Tensor<Real> Detector<Real>::classify(const Tensor<Real>& stacked) const {
  // (B, N, T, d) -> (B, N, d, T): the embedding axis plays the frequency role.
  return cnn_(ops::permute(stacked, {0, 1, 3, 2}));
}

template <typename Real>
ForwardResult<Real> Detector<Real>::forward(const MultiViewBatch<Real>& batch,
                                            const ForwardOptions<Real>& opt) const {
  batch.validate();
  if (batch.views.size() != cfg_.views.size())
    fail(Status::data, Reason::incompatible,
         "model expects " + std::to_string(cfg_.views.size()) + " views, batch has " +
             std::to_string(batch.views.size()));
  for (std::size_t i = 0; i < cfg_.views.size(); ++i) {
    const auto& v = batch.views[i];
    if (v.dim(1) != cfg_.views[i].frames || v.dim(2) != cfg_.views[i].dim)
      fail(Status::data, Reason::incompatible,
           "view '" + cfg_.views[i].name + "' expected (T, D) = (" +
               std::to_string(cfg_.views[i].frames) + ", " +
               std::to_string(cfg_.views[i].dim) + "), got " + to_string(v.shape()));
  }

  ForwardResult<Real> out;
  switch (cfg_.mode) {
    case Mode::single: {
      const auto& v = batch.views[0];
      const std::size_t b = v.dim(0), t = v.dim(1), d = v.dim(2);
      auto x = ops::reshape(ops::permute(v, {0, 2, 1}), {b, 1, d, t});
      out.logits = cnn_(x);
      break;
    }
    case Mode::concat:
      out.logits = classify(concat_views(aligner_(batch)));
      break;
    case Mode::select: {
      auto sel = select_features(aligner_(batch), selectors_, opt.gate, opt.tau, opt.rng);
      out.logits = classify(sel.features);
      out.masks = sel.masks;
      break;
    }
    case Mode::fuse: {
      auto fused = fuse_features(aligner_(batch), fusion_, opt.unit_channel_weights);
      const std::size_t b = fused.dim(0), t = fused.dim(1);
      const std::size_t n = cfg_.views.size(), d = cfg_.fusion.proj_dim;
      auto x = ops::reshape(fused, {b, t, n, d});
      out.logits = cnn_(ops::permute(x, {0, 2, 3, 1}));
      break;
    }
  }
  return out;
}

template <typename Real>
nn::ParameterSet<Real> Detector<Real>::parameters() const {
  nn::ParameterSet<Real> ps;
  if (cfg_.mode != Mode::single) aligner_.collect(ps, "align");
  for (std::size_t i = 0; i < selectors_.size(); ++i)
    selectors_[i].collect(ps, "select." + std::to_string(i));
  if (cfg_.mode == Mode::fuse) fusion_.collect(ps, "fusion");
  cnn_.collect(ps, "cnn");
  return ps;
}

template class Detector<float>;
template class Detector<double>;

}  // namespace addlab
