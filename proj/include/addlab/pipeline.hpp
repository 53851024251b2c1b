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

#ifndef ADDLAB_PIPELINE_HPP
#define ADDLAB_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "addlab/config.hpp"
#include "addlab/eval.hpp"

namespace addlab {

/// Resolved config: defaults overridden by an optional INI file.
PipelineConfig resolve_config(const std::optional<std::filesystem::path>& path);

struct ExtractOptions {
  std::filesystem::path manifest;
  std::string feature;  // mel | mfcc | logspec | lfcc | cqt
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> config;
  std::size_t jobs = 0;  // 0: one per logical CPU
};

struct ExtractSummary {
  std::size_t written = 0;
  std::filesystem::path manifest;  // <out_dir>/manifest.jsonl
};

/// Reads each record's audio, resamples to the configured rate, cuts or
/// loops it to the configured duration and writes <out_dir>/<id>.addf.
/// The augmented manifest lists the new feature path under the feature
/// name. Any failed utterance makes the call fail after all others ran.
ExtractSummary run_extract(const ExtractOptions& opt);

struct TrainOptions {
  std::filesystem::path manifest;
  std::string views;                // name=dir[,name=dir...]
  std::optional<std::string> mode;  // overrides the config
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
};

struct TrainSummary {
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::filesystem::path log;  // <out>.log
};

TrainSummary run_train(const TrainOptions& opt);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::string views;
  std::filesystem::path scores;
  std::filesystem::path report;
  std::size_t jobs = 0;
};

struct EvalSummary {
  EerResult eer;
  std::vector<std::string> skipped;  // per-utterance load failures
};

/// Scores the eval split (every record when the manifest has none).
EvalSummary run_eval(const EvalOptions& opt);

std::string describe_checkpoint(const Checkpoint& ckpt);

/// Generates a synthetic corpus; returns the manifest path.
std::filesystem::path run_synth(const std::filesystem::path& spec,
                                const std::filesystem::path& out_dir);

std::size_t default_jobs(std::size_t requested);

}  // namespace addlab

#endif  // ADDLAB_PIPELINE_HPP
