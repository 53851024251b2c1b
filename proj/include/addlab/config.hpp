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

#ifndef ADDLAB_CONFIG_HPP
#define ADDLAB_CONFIG_HPP

#include <filesystem>
#include <string>

#include "json.hpp"

#include "addlab/dsp.hpp"
#include "addlab/model.hpp"
#include "addlab/train.hpp"

namespace addlab {

/// Everything a run needs. Defaults reproduce the reference recipe: 16 kHz
/// audio cut or looped to 4 s, 25 ms / 10 ms framing, Adam at lr 1e-4 with
/// weight decay 1e-4 for 100 epochs.
///
/// Config files are INI: `[section]` headers, `key = value` lines, `#` or
/// `;` comments. Sections and keys:
///   [audio]    sample_rate, duration_s
///   [framing]  win_ms, hop_ms, fft
///   [features] n_mels, n_mfcc, n_lfcc_filters, n_lfcc, fmin, fmax,
///              cqt_fmin, cqt_bins_per_octave, cqt_bins
///   [model]    mode, stage_blocks (comma list), base_channels, proj_dim,
///              attn_dim, sel_layers, sel_heads, keep_bias_init,
///              share_selection, se_reduction, te_layers, te_heads, te_ff_dim
///   [train]    lr, weight_decay, epochs, batch_size, seed, tau, decoupled_wd
/// Unknown sections or keys are rejected.
struct PipelineConfig {
  int sample_rate = 16000;
  double duration_s = 4.0;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t fft = 512;
  FeatureParams features;
  ModelConfig model;
  TrainConfig train;

  FrameConfig frame() const;
  void validate() const;
};

PipelineConfig parse_config(const std::string& ini_text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string format_config(const PipelineConfig& c);
nlohmann::json to_json(const PipelineConfig& c);

}  // namespace addlab

#endif  // ADDLAB_CONFIG_HPP
