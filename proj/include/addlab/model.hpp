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

#ifndef ADDLAB_MODEL_HPP
#define ADDLAB_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "addlab/incorporation.hpp"
#include "addlab/nn.hpp"

namespace addlab {

/// How the candidate views reach the classifier.
///   single: one raw view as a 1-channel (D, T) map
///   concat: aligned views stacked as channels, no gating
///   select: concat with a learned binary keep gate per view
///   fuse:   channel attention plus axial Transformer over the stacked views
enum class Mode { single, concat, select, fuse };

const char* mode_name(Mode m) noexcept;
Mode parse_mode(const std::string& s);

struct ModelConfig {
  Mode mode = Mode::single;
  std::vector<ViewSpec> views;
  nn::ResidualCnnConfig cnn;  // in_channels is derived from mode and views
  nn::SelectionHeadConfig selection;
  nn::FusionHeadConfig fusion;  // proj_dim is also the aligner width
  bool share_selection = false;

  void validate() const;
  std::size_t classifier_channels() const;
};

template <typename Real>
struct ForwardOptions {
  GateMode gate = GateMode::argmax;
  Real tau = Real(1);
  CounterRng* rng = nullptr;  // required when gate == sample
  bool unit_channel_weights = false;
};

template <typename Real>
struct ForwardResult {
  Tensor<Real> logits;  // (B, num_classes)
  Tensor<Real> masks;   // (B, N) in select mode, empty otherwise
};

template <typename Real>
class Detector {
 public:
  Detector(const ModelConfig& cfg, std::uint64_t seed);

  ForwardResult<Real> forward(const MultiViewBatch<Real>& batch,
                              const ForwardOptions<Real>& opt = {}) const;

  /// Stable, ordered parameter list; the order defines checkpoint layout.
  nn::ParameterSet<Real> parameters() const;

  const ModelConfig& config() const { return cfg_; }
  FusionHead<Real>& fusion_head() { return fusion_; }
  ViewAligner<Real>& aligner() { return aligner_; }

 private:
  Tensor<Real> classify(const Tensor<Real>& stacked) const;

  ModelConfig cfg_;
  ViewAligner<Real> aligner_;
  std::vector<nn::SelectionHead<Real>> selectors_;
  FusionHead<Real> fusion_;
  nn::ResidualCnn<Real> cnn_;
};

}  // namespace addlab

#endif  // ADDLAB_MODEL_HPP
