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

#ifndef ADDLAB_SYNTH_HPP
#define ADDLAB_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "addlab/dataset.hpp"
#include "addlab/featureio.hpp"

namespace addlab {

/// Two-class multi-view toy data. Every view of a sample is a (D, T) map
///   x[d, t] = y * signal * info_i * g_i[d] + noise * n[d, t]
/// with y = +1 for genuine and -1 for spoof, g_i a fixed positive-mean
/// template of unit RMS, and n independent standard normal noise. A view with
/// info_i = 0 is pure noise. The Bayes-optimal single-view EER is
/// Phi(-signal * info_i * sqrt(D * T) / noise).
struct SynthSpec {
  std::vector<std::string> names{"view0", "view1", "view2"};
  std::vector<double> informativeness{0.5, 0.5, 0.0};
  std::vector<std::size_t> dims{16, 16, 16};
  std::vector<std::size_t> frames{16, 16, 16};
  std::size_t n_train = 2000;
  std::size_t n_dev = 0;
  std::size_t n_eval = 500;
  double signal = 0.105;
  double noise = 1.0;
  double frame_rate = 100.0;
  std::uint64_t seed = 0;

  std::size_t n_views() const { return names.size(); }
  void validate() const;
};

/// INI with a single [synth] section; list values are comma separated:
///   names, informativeness, dims, frames, n_train, n_dev, n_eval, signal,
///   noise, frame_rate, seed
SynthSpec parse_synth_spec(const std::string& ini_text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

/// Closed-form Bayes EER of one view used alone.
double synth_bayes_eer(const SynthSpec& spec, std::size_t view);

struct SynthData {
  Dataset train, dev, eval;
};

/// Deterministic in spec.seed. Labels alternate genuine/spoof, so each split
/// of even size is exactly balanced.
SynthData generate(const SynthSpec& spec);

/// Writes <dir>/<view>/<id>.addf for every sample and <dir>/manifest.jsonl
/// referencing them; returns the manifest path.
std::filesystem::path write_synth(const SynthSpec& spec, const SynthData& data,
                                  const std::filesystem::path& dir);

}  // namespace addlab

#endif  // ADDLAB_SYNTH_HPP
