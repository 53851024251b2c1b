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

#include "addlab/pipeline.hpp"

#include <atomic>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "addlab/audio.hpp"
#include "addlab/error.hpp"
#include "addlab/synth.hpp"

namespace addlab {

std::size_t default_jobs(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

PipelineConfig resolve_config(const std::optional<std::filesystem::path>& path) {
  return path ? load_config(*path) : PipelineConfig{};
}

ExtractSummary run_extract(const ExtractOptions& opt) {
  const auto cfg = resolve_config(opt.config);
  const auto kind = parse_feature_kind(opt.feature);
  const auto manifest = load_manifest(opt.manifest);
  const FeatureExtractor extract(kind, cfg.sample_rate, cfg.frame(), cfg.features);
  std::filesystem::create_directories(opt.out_dir);
  const std::string name = feature_kind_name(kind);

  const std::size_t n = manifest.records.size();
  std::vector<std::string> problems(n);
  std::vector<bool> done(n, false);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& rec = manifest.records[i];
      if (rec.audio_path.empty()) {
        problems[i] = rec.id + " (line " + std::to_string(rec.line) + "): no audio path";
        continue;
      }
      try {
        auto clip = read_wav(manifest.resolve(rec.audio_path));
        clip = fix_duration(resample(clip, cfg.sample_rate), cfg.duration_s);
        auto feat = extract(clip);
        write_feature_file(feat, opt.out_dir / (rec.id + ".addf"));
        done[i] = true;
        spdlog::debug("extracted {} {}", rec.id, to_string(feat.dims));
      } catch (const Error& e) {
        problems[i] = rec.id + " (line " + std::to_string(rec.line) + "): " + e.what();
      }
    }
  };
  const std::size_t jobs = std::min(default_jobs(opt.jobs), std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  ExtractSummary sum;
  DatasetManifest out = manifest;
  out.base_dir = opt.out_dir;
  const auto out_abs = std::filesystem::absolute(opt.out_dir);
  for (std::size_t i = 0; i < n; ++i) {
    auto& rec = out.records[i];
    if (!rec.audio_path.empty()) {
      const auto abs = std::filesystem::absolute(manifest.resolve(rec.audio_path));
      rec.audio_path = std::filesystem::relative(abs, out_abs).generic_string();
    }
    for (auto& [view, p] : rec.feature_paths) {
      const auto abs = std::filesystem::absolute(manifest.resolve(p));
      p = std::filesystem::relative(abs, out_abs).generic_string();
    }
    if (done[i]) {
      rec.feature_paths[name] = rec.id + ".addf";
      ++sum.written;
    }
  }
  sum.manifest = opt.out_dir / "manifest.jsonl";
  save_manifest(out, sum.manifest);

  std::string msg;
  std::size_t failed = 0;
  for (const auto& p : problems)
    if (!p.empty()) {
      msg += "\n  " + p;
      ++failed;
    }
  if (failed)
    fail(Status::data, Reason::validation,
         fmt::format("{} of {} utterances failed:{}", failed, n, msg));
  spdlog::info("extracted {} '{}' features to {}", sum.written, name, opt.out_dir.string());
  return sum;
}

TrainSummary run_train(const TrainOptions& opt) {
  auto cfg = resolve_config(opt.config);
  if (opt.mode) cfg.model.mode = parse_mode(*opt.mode);
  if (opt.seed) cfg.train.seed = *opt.seed;
  const auto sources = parse_view_sources(opt.views);
  if (cfg.model.mode == Mode::single && sources.size() != 1)
    fail(Status::usage, Reason::parameter, "single mode takes exactly one view");

  const auto manifest = load_manifest(opt.manifest);
  const auto split = train_val_split(manifest);
  if (split.train.empty()) fail(Status::data, Reason::empty_input, "manifest has no training records");
  if (split.val.empty()) fail(Status::data, Reason::empty_input, "no validation records");
  const std::size_t jobs = default_jobs(opt.jobs);
  const auto train = load_dataset(manifest, split.train, sources, nullptr, jobs);
  const auto val = load_dataset(manifest, split.val, sources, nullptr, jobs);
  spdlog::info("training {} model on {} samples ({} validation), views {}",
               mode_name(cfg.model.mode), train.size(), val.size(), opt.views);

  cfg.model.views = train.views;
  auto result = fit(cfg.model, train, val, cfg.train, [](const EpochRecord& e) {
    std::string keep;
    for (auto k : e.keep_rate) keep += fmt::format(" {:.3f}", k);
    spdlog::info("epoch {} train_loss {:.5f} acc {:.3f} val_loss {:.5f}{}{}", e.epoch,
                 e.train_loss, e.train_accuracy, e.val_loss, keep.empty() ? "" : " keep", keep);
  });
  result.log.header["pipeline"] = to_json(cfg);
  result.log.header["pipeline"]["model"] = to_json(result.best.model);

  save_checkpoint(result.best, opt.out);
  TrainSummary sum;
  sum.best_epoch = result.best.epoch;
  sum.best_val_loss = result.best.val_loss;
  sum.log = opt.out;
  sum.log += ".log";
  atomic_write(sum.log, format_train_log(result.log));
  spdlog::info("best epoch {} (val loss {:.6f}) saved to {}", sum.best_epoch,
               sum.best_val_loss, opt.out.string());
  return sum;
}

EvalSummary run_eval(const EvalOptions& opt) {
  const auto ckpt = load_checkpoint(opt.checkpoint);
  const auto sources = parse_view_sources(opt.views);
  const auto manifest = load_manifest(opt.manifest);
  auto records = manifest.split(Split::eval);
  if (records.empty())
    for (const auto& r : manifest.records) records.push_back(&r);

  EvalSummary sum;
  const auto scores = score_utterances(ckpt, manifest, records, sources, &sum.skipped,
                                       default_jobs(opt.jobs), ckpt.train.batch_size);
  for (const auto& s : sum.skipped) spdlog::error("skipped {}", s);
  sum.eer = compute_eer(scores);
  atomic_write(opt.scores, format_scores(scores));
  atomic_write(opt.report, format_report(sum.eer, sum.skipped));
  spdlog::info("eer {:.6f} at threshold {:.6f} over {} genuine / {} spoof", sum.eer.eer,
               sum.eer.threshold, sum.eer.n_genuine, sum.eer.n_spoof);
  return sum;
}

std::string describe_checkpoint(const Checkpoint& ckpt) {
  const auto& m = ckpt.model;
  std::size_t count = 0;
  for (const auto& p : ckpt.params) count += p.values.size();
  std::string out;
  out += fmt::format("mode: {}\n", mode_name(m.mode));
  for (const auto& v : m.views)
    out += fmt::format("view: {} (D={}, T={}, {} fps)\n", v.name, v.dim, v.frames, v.frame_rate);
  out += fmt::format("classifier: stages [{}] base_channels {} in_channels {}\n",
                     fmt::join(m.cnn.stage_blocks, ","), m.cnn.base_channels,
                     m.cnn.in_channels);
  out += fmt::format("parameters: {} in {} tensors\n", count, ckpt.params.size());
  out += fmt::format("epoch: {}\n", ckpt.epoch);
  out += fmt::format("best val loss: {}\n", ckpt.val_loss);
  const auto& t = ckpt.train;
  out += fmt::format("train: lr={} weight_decay={} epochs={} batch_size={} seed={} tau={}{}\n",
                     t.lr, t.weight_decay, t.epochs, t.batch_size, t.seed, t.tau,
                     t.decoupled_wd ? " decoupled_wd" : "");
  return out;
}

std::filesystem::path run_synth(const std::filesystem::path& spec_path,
                                const std::filesystem::path& out_dir) {
  const auto spec = load_synth_spec(spec_path);
  const auto data = generate(spec);
  const auto manifest = write_synth(spec, data, out_dir);
  spdlog::info("wrote {} train / {} dev / {} eval samples over {} views to {}",
               data.train.size(), data.dev.size(), data.eval.size(), spec.n_views(),
               out_dir.string());
  return manifest;
}

}  // namespace addlab
