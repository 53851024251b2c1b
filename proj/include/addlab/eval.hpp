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

#ifndef ADDLAB_EVAL_HPP
#define ADDLAB_EVAL_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "addlab/dataset.hpp"
#include "addlab/featureio.hpp"
#include "addlab/train.hpp"

namespace addlab {

struct ScoreEntry {
  std::string id;
  double score = 0.0;  // P(genuine); higher means more genuine
  Label label = Label::genuine;
};

struct ScoreSet {
  std::vector<ScoreEntry> entries;

  std::size_t count(Label l) const;
  /// Unique ids and finite scores.
  void validate() const;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_spoof = 0;
};

/// One operating point of the threshold sweep. Accept means score >= t.
struct DetPoint {
  double threshold;
  double far;  // spoof accepted
  double frr;  // genuine rejected
};

/// Sweeps -inf, midpoints between consecutive distinct scores, +inf, in
/// increasing threshold order: distinct + 1 points.
std::vector<DetPoint> det_points(const ScoreSet& scores);

/// Crossing of FAR and FRR over det_points, linearly interpolated between
/// the bracketing points. Needs both classes (usage error otherwise).
EerResult compute_eer(const ScoreSet& scores);

/// Scores every record with a checkpointed model. Records whose features are
/// missing or unreadable are skipped and described in `errors`; a view-name
/// or shape mismatch against the checkpoint aborts.
ScoreSet score_utterances(const Checkpoint& ckpt, const DatasetManifest& manifest,
                          const std::vector<const ManifestRecord*>& records,
                          const std::vector<ViewSource>& sources,
                          std::vector<std::string>* errors = nullptr,
                          std::size_t jobs = 1, std::size_t batch_size = 32);

/// Same, from an in-memory dataset.
ScoreSet score_dataset(const Detector<float>& model, const Dataset& data,
                       std::size_t batch_size = 32, std::size_t jobs = 1);

/// P(genuine) from a two-class logit pair.
double genuine_probability(double logit_genuine, double logit_spoof);

std::string format_scores(const ScoreSet& s);
ScoreSet parse_scores(const std::string& text);
std::string format_report(const EerResult& r,
                          const std::vector<std::string>& skipped = {});

}  // namespace addlab

#endif  // ADDLAB_EVAL_HPP
