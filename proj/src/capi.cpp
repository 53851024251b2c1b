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

#include "addlab/addlab.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "addlab/error.hpp"
#include "addlab/pipeline.hpp"

struct addlab_checkpoint {
  addlab::Checkpoint value;
};

struct addlab_feature {
  addlab::FeatureTensor value;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_reason;

addlab_status set_error(addlab::Status s, addlab::Reason r, const char* what) {
  g_error = what;
  g_reason = addlab::reason_name(r);
  return static_cast<addlab_status>(s);
}

// Runs `body`, mapping every exception onto a status code and message.
template <typename F>
addlab_status guarded(F&& body) noexcept {
  try {
    g_error.clear();
    g_reason.clear();
    return body();
  } catch (const addlab::Error& e) {
    return set_error(e.status(), e.reason(), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(addlab::Status::runtime, addlab::Reason::generic, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(addlab::Status::runtime, addlab::Reason::io, e.what());
  } catch (const std::exception& e) {
    return set_error(addlab::Status::runtime, addlab::Reason::generic, e.what());
  }
}

addlab_status require(const void* p, const char* what) {
  if (p) return ADDLAB_OK;
  return set_error(addlab::Status::usage, addlab::Reason::parameter,
                   (std::string(what) + " must not be NULL").c_str());
}

std::optional<std::filesystem::path> opt_path(const char* s) {
  if (!s || !*s) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

extern "C" {

const char* addlab_last_error(void) { return g_error.c_str(); }
const char* addlab_last_error_reason(void) { return g_reason.c_str(); }
const char* addlab_version(void) { return "0.1.0"; }

addlab_status addlab_set_log_level(const char* level) {
  return guarded([&] {
    // Diagnostics go to stderr so stdout stays clean for command output.
    static const bool once = [] {
      spdlog::set_default_logger(spdlog::stderr_color_mt("addlab"));
      return true;
    }();
    (void)once;
    std::string l = level ? level : "";
    if (l.empty()) {
      const char* env = std::getenv("ADDLAB_LOG");
      l = env ? env : "info";
    }
    if (l == "error") {
      spdlog::set_level(spdlog::level::err);
    } else if (l == "info") {
      spdlog::set_level(spdlog::level::info);
    } else if (l == "debug") {
      spdlog::set_level(spdlog::level::debug);
    } else {
      addlab::fail(addlab::Status::usage, addlab::Reason::parameter,
                   "log level must be error, info or debug, got '" + l + "'");
    }
    return ADDLAB_OK;
  });
}

addlab_status addlab_extract(const char* manifest, const char* feature,
                             const char* out_dir, const char* config, size_t jobs) {
  if (auto s = require(manifest, "manifest")) return s;
  if (auto s = require(feature, "feature")) return s;
  if (auto s = require(out_dir, "out_dir")) return s;
  return guarded([&] {
    addlab::run_extract({manifest, feature, out_dir, opt_path(config), jobs});
    return ADDLAB_OK;
  });
}

addlab_status addlab_train(const char* manifest, const char* views, const char* mode,
                           const char* out, const char* config, const uint64_t* seed,
                           size_t jobs) {
  if (auto s = require(manifest, "manifest")) return s;
  if (auto s = require(views, "views")) return s;
  if (auto s = require(out, "out")) return s;
  return guarded([&] {
    addlab::TrainOptions o;
    o.manifest = manifest;
    o.views = views;
    if (mode && *mode) o.mode = mode;
    o.out = out;
    o.config = opt_path(config);
    if (seed) o.seed = *seed;
    o.jobs = jobs;
    addlab::run_train(o);
    return ADDLAB_OK;
  });
}

addlab_status addlab_eval(const char* checkpoint, const char* manifest, const char* views,
                          const char* scores, const char* report, size_t jobs,
                          double* eer_out) {
  if (auto s = require(checkpoint, "checkpoint")) return s;
  if (auto s = require(manifest, "manifest")) return s;
  if (auto s = require(views, "views")) return s;
  if (auto s = require(scores, "scores")) return s;
  if (auto s = require(report, "report")) return s;
  return guarded([&] {
    const auto sum = addlab::run_eval({checkpoint, manifest, views, scores, report, jobs});
    if (eer_out) *eer_out = sum.eer.eer;
    if (!sum.skipped.empty()) {
      std::string msg = std::to_string(sum.skipped.size()) + " utterance(s) skipped:";
      for (const auto& s : sum.skipped) msg += "\n  " + s;
      return set_error(addlab::Status::data, addlab::Reason::io, msg.c_str());
    }
    return ADDLAB_OK;
  });
}

addlab_status addlab_synth(const char* spec, const char* out_dir) {
  if (auto s = require(spec, "spec")) return s;
  if (auto s = require(out_dir, "out_dir")) return s;
  return guarded([&] {
    addlab::run_synth(spec, out_dir);
    return ADDLAB_OK;
  });
}

addlab_status addlab_checkpoint_load(const char* path, addlab_checkpoint** out) {
  if (auto s = require(path, "path")) return s;
  if (auto s = require(out, "out")) return s;
  *out = nullptr;
  return guarded([&] {
    *out = new addlab_checkpoint{addlab::load_checkpoint(path)};
    return ADDLAB_OK;
  });
}

void addlab_checkpoint_free(addlab_checkpoint* ckpt) { delete ckpt; }

addlab_status addlab_checkpoint_describe(const addlab_checkpoint* ckpt, char* buf,
                                         size_t cap, size_t* needed) {
  if (auto s = require(ckpt, "checkpoint")) return s;
  return guarded([&] {
    const auto text = addlab::describe_checkpoint(ckpt->value);
    if (needed) *needed = text.size() + 1;
    if (buf && cap > text.size()) std::memcpy(buf, text.c_str(), text.size() + 1);
    return ADDLAB_OK;
  });
}

size_t addlab_checkpoint_epoch(const addlab_checkpoint* ckpt) {
  return ckpt ? ckpt->value.epoch : 0;
}

double addlab_checkpoint_val_loss(const addlab_checkpoint* ckpt) {
  return ckpt ? ckpt->value.val_loss : 0.0;
}

addlab_status addlab_feature_read(const char* path, addlab_feature** out) {
  if (auto s = require(path, "path")) return s;
  if (auto s = require(out, "out")) return s;
  *out = nullptr;
  return guarded([&] {
    *out = new addlab_feature{addlab::read_feature_file(path)};
    return ADDLAB_OK;
  });
}

void addlab_feature_free(addlab_feature* f) { delete f; }

const char* addlab_feature_name(const addlab_feature* f) {
  return f ? f->value.name.c_str() : "";
}

size_t addlab_feature_ndims(const addlab_feature* f) { return f ? f->value.dims.size() : 0; }

size_t addlab_feature_dim(const addlab_feature* f, size_t axis) {
  return f && axis < f->value.dims.size() ? f->value.dims[axis] : 0;
}

float addlab_feature_frame_rate(const addlab_feature* f) {
  return f ? static_cast<float>(f->value.frame_rate) : 0.0f;
}

const float* addlab_feature_data(const addlab_feature* f) {
  return f ? f->value.data.data() : nullptr;
}

addlab_status addlab_feature_write(const char* path, const char* name, const size_t* dims,
                                   size_t ndims, const float* data, float frame_rate) {
  if (auto s = require(path, "path")) return s;
  if (auto s = require(name, "name")) return s;
  if (auto s = require(dims, "dims")) return s;
  return guarded([&] {
    addlab::FeatureTensor t;
    t.name = name;
    t.dims.assign(dims, dims + ndims);
    t.frame_rate = frame_rate;
    std::size_t n = 1;
    for (auto d : t.dims) n *= d;
    if (n > 0 && !data)
      addlab::fail(addlab::Status::usage, addlab::Reason::parameter, "data must not be NULL");
    t.data.assign(data, data + n);
    addlab::write_feature_file(t, path);
    return ADDLAB_OK;
  });
}

addlab_status addlab_compute_eer(const double* scores, const int* labels, size_t n,
                                 double* eer, double* threshold) {
  if (n > 0) {
    if (auto s = require(scores, "scores")) return s;
    if (auto s = require(labels, "labels")) return s;
  }
  return guarded([&] {
    addlab::ScoreSet set;
    for (size_t i = 0; i < n; ++i) {
      if (labels[i] != 0 && labels[i] != 1)
        addlab::fail(addlab::Status::usage, addlab::Reason::label, "labels must be 0 or 1");
      set.entries.push_back({"", scores[i], static_cast<addlab::Label>(labels[i])});
    }
    const auto r = addlab::compute_eer(set);
    if (eer) *eer = r.eer;
    if (threshold) *threshold = r.threshold;
    return ADDLAB_OK;
  });
}

}  // extern "C"
