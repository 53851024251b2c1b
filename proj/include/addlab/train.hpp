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

#ifndef ADDLAB_TRAIN_HPP
#define ADDLAB_TRAIN_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "addlab/dataset.hpp"
#include "addlab/model.hpp"
#include "addlab/rng.hpp"

namespace addlab {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double tau = 1.0;
  bool decoupled_wd = false;  // AdamW-style decay instead of L2 in the gradient

  void validate() const;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool decoupled = false;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every parameter in `ps` using the
/// gradients left by backward(). Parameters without a gradient see g = 0.
template <typename Real>
void adam_step(nn::ParameterSet<Real>& ps, AdamState& state,
               const AdamOptions& opt);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  std::vector<double> keep_rate;  // select mode: mean of sampled training masks per view
};

struct TrainLog {
  nlohmann::json header;  // resolved configuration
  std::vector<EpochRecord> epochs;
};

std::string format_train_log(const TrainLog& log);
TrainLog parse_train_log(const std::string& text);

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::size_t epoch = 0;
  double val_loss = 0.0;
  CounterRng::State rng;
  std::vector<NamedArray> params;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

Checkpoint snapshot(const Detector<float>& model);
/// Copies checkpoint values into a model built from the same config.
void restore(Detector<float>& model, const Checkpoint& ckpt);
Detector<float> build_detector(const Checkpoint& ckpt);

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt);
/// Errors: Reason::truncated, magic, version, checksum, format.
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& t);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct FitResult {
  Checkpoint best;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains for cfg.epochs epochs with a seeded shuffle and returns the
/// checkpoint of the epoch with the lowest validation loss (earliest on
/// ties). A non-finite loss aborts with Reason::nan_loss.
FitResult fit(const ModelConfig& model_cfg, const Dataset& train, const Dataset& val,
              const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean cross-entropy of a model over a dataset with inference gates.
double evaluate_loss(const Detector<float>& model, const Dataset& data,
                     std::size_t batch_size);

/// Inference logits for every sample, (n, num_classes) row-major, plus the
/// argmax gates in select mode (n, N).
struct Predictions {
  std::vector<float> logits;
  std::vector<float> masks;
  std::size_t classes = 0;
  std::size_t views = 0;
};
Predictions predict(const Detector<float>& model, const Dataset& data,
                    std::size_t batch_size, std::size_t jobs = 1);

}  // namespace addlab

#endif  // ADDLAB_TRAIN_HPP
