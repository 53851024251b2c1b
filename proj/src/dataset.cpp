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

#include "addlab/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <optional>
#include <thread>

#include "addlab/error.hpp"

namespace addlab {

std::vector<ViewSource> parse_view_sources(const std::string& spec) {
  std::vector<ViewSource> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const auto item = spec.substr(start, comma == std::string::npos ? std::string::npos
                                                                    : comma - start);
    if (item.empty()) fail(Status::usage, Reason::parameter, "empty entry in --views");
    const auto eq = item.find('=');
    ViewSource v;
    v.name = item.substr(0, eq);
    if (eq != std::string::npos) v.dir = item.substr(eq + 1);
    if (v.name.empty()) fail(Status::usage, Reason::parameter, "view with empty name");
    for (const auto& prev : out)
      if (prev.name == v.name)
        fail(Status::usage, Reason::parameter, "view '" + v.name + "' listed twice");
    out.push_back(std::move(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void Dataset::append(const std::string& id, int label,
                     const std::vector<FeatureTensor>& features) {
  if (label != 0 && label != 1) fail(Status::data, Reason::label, "label must be 0 or 1");
  if (views.empty()) {
    for (const auto& f : features) {
      if (f.dims.size() != 2)
        fail(Status::data, Reason::shape,
             id + ": view '" + f.name + "' must be 2-D (D, T)");
      views.push_back({f.name, f.dim(), f.frames(), f.frame_rate});
    }
    values.resize(views.size());
  }
  if (features.size() != views.size())
    fail(Status::data, Reason::shape, id + ": wrong number of views");
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto& f = features[v];
    if (f.dims.size() != 2 || f.dim() != views[v].dim || f.frames() != views[v].frames)
      fail(Status::data, Reason::shape,
           id + ": view '" + views[v].name + "' is " + to_string(f.dims) +
               ", expected [" + std::to_string(views[v].dim) + ", " +
               std::to_string(views[v].frames) + "]");
    const std::size_t D = f.dim(), T = f.frames();
    auto& dst = values[v];
    const std::size_t base = dst.size();
    dst.resize(base + D * T);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t t = 0; t < T; ++t) dst[base + t * D + d] = f.data[d * T + t];
  }
  ids.push_back(id);
  labels.push_back(label);
}

template <typename Real>
MultiViewBatch<Real> Dataset::batch(std::span<const std::size_t> indices) const {
  MultiViewBatch<Real> b;
  const std::size_t B = indices.size();
  for (std::size_t v = 0; v < views.size(); ++v) {
    const std::size_t s = sample_size(v);
    std::vector<Real> data(B * s);
    for (std::size_t i = 0; i < B; ++i) {
      const float* src = values[v].data() + indices[i] * s;
      std::copy(src, src + s, data.begin() + static_cast<std::ptrdiff_t>(i * s));
    }
    b.views.push_back(
        Tensor<Real>::from({B, views[v].frames, views[v].dim}, std::move(data)));
    b.names.push_back(views[v].name);
  }
  return b;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.views = views;
  out.values.resize(views.size());
  for (std::size_t i : indices) {
    for (std::size_t v = 0; v < views.size(); ++v) {
      const std::size_t s = sample_size(v);
      const float* src = values[v].data() + i * s;
      out.values[v].insert(out.values[v].end(), src, src + s);
    }
    out.ids.push_back(ids[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

void Dataset::validate() const {
  if (values.size() != views.size())
    fail(Status::data, Reason::shape, "dataset view count mismatch");
  if (ids.size() != labels.size())
    fail(Status::data, Reason::shape, "dataset id/label count mismatch");
  for (std::size_t v = 0; v < views.size(); ++v)
    if (values[v].size() != size() * sample_size(v))
      fail(Status::data, Reason::shape, "dataset view '" + views[v].name + "' size mismatch");
}

Dataset load_dataset(const DatasetManifest& manifest,
                     const std::vector<const ManifestRecord*>& records,
                     const std::vector<ViewSource>& sources,
                     std::vector<std::string>* errors, std::size_t jobs) {
  if (sources.empty()) fail(Status::usage, Reason::parameter, "no views given");
  const std::size_t n = records.size();
  std::vector<std::optional<std::vector<FeatureTensor>>> loaded(n);
  std::vector<std::string> problems(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& rec = *records[i];
      try {
        std::vector<FeatureTensor> fs;
        for (const auto& src : sources) {
          std::filesystem::path p;
          if (!src.dir.empty()) {
            p = src.dir / (rec.id + ".addf");
          } else {
            auto it = rec.feature_paths.find(src.name);
            if (it == rec.feature_paths.end())
              fail(Status::data, Reason::validation,
                   "no feature path for view '" + src.name + "'");
            p = manifest.resolve(it->second);
          }
          auto f = read_feature_file(p);
          f.name = src.name;
          fs.push_back(std::move(f));
        }
        loaded[i] = std::move(fs);
      } catch (const Error& e) {
        problems[i] = rec.id + " (line " + std::to_string(rec.line) + "): " + e.what();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = *records[i];
    if (loaded[i]) {
      try {
        ds.append(rec.id, static_cast<int>(rec.label), *loaded[i]);
        continue;
      } catch (const Error& e) {
        problems[i] = rec.id + " (line " + std::to_string(rec.line) + "): " + e.what();
      }
    }
    if (errors == nullptr) fail(Status::data, Reason::io, problems[i]);
    errors->push_back(problems[i]);
  }
  if (ds.views.empty()) {
    // Nothing loaded; still report the declared view names.
    for (const auto& s : sources) ds.views.push_back({s.name, 0, 0, 0.0});
    ds.values.resize(sources.size());
  }
  return ds;
}

TrainValSplit train_val_split(const DatasetManifest& manifest) {
  TrainValSplit out;
  out.train = manifest.split(Split::train);
  out.val = manifest.split(Split::dev);
  if (out.val.empty() && out.train.size() >= 2) {
    const std::size_t n_val = std::max<std::size_t>(1, out.train.size() / 10);
    out.val.assign(out.train.end() - static_cast<std::ptrdiff_t>(n_val), out.train.end());
    out.train.resize(out.train.size() - n_val);
  }
  return out;
}

template MultiViewBatch<float> Dataset::batch(std::span<const std::size_t>) const;
template MultiViewBatch<double> Dataset::batch(std::span<const std::size_t>) const;

}  // namespace addlab
