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

#ifndef ADDLAB_DATASET_HPP
#define ADDLAB_DATASET_HPP

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "addlab/featureio.hpp"
#include "addlab/incorporation.hpp"

namespace addlab {

/// Where one view's features come from. With an empty dir the manifest's
/// feature path for `name` is used, otherwise `<dir>/<id>.addf`.
struct ViewSource {
  std::string name;
  std::filesystem::path dir;
};

/// Parses "name=dir,name2=dir2" (a bare "name" selects manifest paths).
std::vector<ViewSource> parse_view_sources(const std::string& spec);

/// In-memory labelled multi-view features. Each sample of view i is stored
/// time-major as (T_i, D_i).
struct Dataset {
  std::vector<ViewSpec> views;
  std::vector<std::vector<float>> values;  // per view: n * T_i * D_i
  std::vector<int> labels;                 // 0 genuine, 1 spoof
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size(std::size_t view) const {
    return views[view].frames * views[view].dim;
  }

  /// Appends one sample given per-view feature tensors laid out (D, T).
  void append(const std::string& id, int label,
              const std::vector<FeatureTensor>& features);

  template <typename Real>
  MultiViewBatch<Real> batch(std::span<const std::size_t> indices) const;

  Dataset subset(std::span<const std::size_t> indices) const;
  void validate() const;
};

/// Loads the given records. Per-record failures (missing or corrupt files,
/// shape mismatches) are appended to `errors` and the record skipped; with a
/// null `errors` the first failure is thrown. Reads run on `jobs` threads.
Dataset load_dataset(const DatasetManifest& manifest,
                     const std::vector<const ManifestRecord*>& records,
                     const std::vector<ViewSource>& sources,
                     std::vector<std::string>* errors = nullptr,
                     std::size_t jobs = 1);

/// Training and validation partitions: the dev split when present,
/// otherwise the last 10% of train records in manifest order.
struct TrainValSplit {
  std::vector<const ManifestRecord*> train;
  std::vector<const ManifestRecord*> val;
};
TrainValSplit train_val_split(const DatasetManifest& manifest);

}  // namespace addlab

#endif  // ADDLAB_DATASET_HPP
