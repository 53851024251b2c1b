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

// addlab command-line front end. Links only the C API.

#include <cstdint>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "addlab/addlab.h"

namespace {

int report(addlab_status s) {
  if (s != ADDLAB_OK) std::fprintf(stderr, "addlab: error: %s\n", addlab_last_error());
  return static_cast<int>(s);
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view audio deepfake detection: features, training, EER evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", addlab_version());

  const std::size_t cpus = std::max(1u, std::thread::hardware_concurrency());
  std::string manifest, feature, out_dir, config, views, mode, out, ckpt, scores, report_path,
      spec;
  std::size_t jobs = cpus;
  std::uint64_t seed = 0;

  auto* extract = app.add_subcommand("extract", "compute one feature file per utterance");
  extract->add_option("--manifest", manifest, "JSON-lines manifest")->required();
  extract->add_option("--feature", feature, "feature kind")
      ->required()
      ->check(CLI::IsMember({"mel", "mfcc", "logspec", "lfcc", "cqt"}));
  extract->add_option("--out-dir", out_dir, "output directory")->required();
  extract->add_option("--config", config, "INI config file");
  extract->add_option("--jobs", jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train a detector; keeps the lowest validation loss");
  train->add_option("--manifest", manifest, "JSON-lines manifest")->required();
  train->add_option("--views", views, "name=dir[,name=dir...]")->required();
  train->add_option("--mode", mode, "single, concat, select or fuse")
      ->required()
      ->check(CLI::IsMember({"single", "concat", "select", "fuse"}));
  train->add_option("--out", out, "checkpoint path (log goes to <out>.log)")->required();
  train->add_option("--config", config, "INI config file");
  auto* seed_opt = train->add_option("--seed", seed, "overrides [train] seed");
  train->add_option("--jobs", jobs, "feature loading threads")->capture_default_str()->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "score utterances and report the EER");
  eval->add_option("--ckpt", ckpt, "checkpoint")->required();
  eval->add_option("--manifest", manifest, "JSON-lines manifest")->required();
  eval->add_option("--views", views, "name=dir[,name=dir...]; must match the checkpoint")->required();
  eval->add_option("--scores", scores, "score file (id, score, label)")->required();
  eval->add_option("--report", report_path, "EER report")->required();
  eval->add_option("--jobs", jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  auto* inspect = app.add_subcommand("inspect", "summarise a checkpoint");
  inspect->add_option("--ckpt", ckpt, "checkpoint")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-view corpus");
  synth->add_option("--spec", spec, "INI spec with a [synth] section")->required();
  synth->add_option("--out-dir", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ADDLAB_ERR_USAGE;
  }

  if (auto s = addlab_set_log_level(nullptr)) return report(s);

  if (*extract)
    return report(addlab_extract(manifest.c_str(), feature.c_str(), out_dir.c_str(),
                                 or_null(config), jobs));
  if (*train)
    return report(addlab_train(manifest.c_str(), views.c_str(), mode.c_str(), out.c_str(),
                               or_null(config), seed_opt->count() ? &seed : nullptr, jobs));
  if (*eval) {
    double eer = 0.0;
    return report(addlab_eval(ckpt.c_str(), manifest.c_str(), views.c_str(), scores.c_str(),
                              report_path.c_str(), jobs, &eer));
  }
  if (*inspect) {
    addlab_checkpoint* c = nullptr;
    if (auto s = addlab_checkpoint_load(ckpt.c_str(), &c)) return report(s);
    std::size_t need = 0;
    addlab_checkpoint_describe(c, nullptr, 0, &need);
    std::vector<char> buf(need);
    const auto s = addlab_checkpoint_describe(c, buf.data(), buf.size(), &need);
    addlab_checkpoint_free(c);
    if (s != ADDLAB_OK) return report(s);
    std::fputs(buf.data(), stdout);
    return 0;
  }
  if (*synth) return report(addlab_synth(spec.c_str(), out_dir.c_str()));
  return ADDLAB_ERR_USAGE;
}
