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

#include "addlab/synth.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "addlab/error.hpp"
#include "addlab/rng.hpp"

namespace addlab {

namespace pt = boost::property_tree;

void SynthSpec::validate() const {
  const std::size_t n = names.size();
  if (n == 0) fail(Status::usage, Reason::parameter, "synth spec needs at least one view");
  if (informativeness.size() != n || dims.size() != n || frames.size() != n)
    fail(Status::usage, Reason::parameter,
         "synth spec: names, informativeness, dims and frames must have equal length");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (names[i].empty()) fail(Status::usage, Reason::parameter, "synth view with empty name");
    if (!(informativeness[i] >= 0.0 && informativeness[i] <= 1.0))
      fail(Status::usage, Reason::parameter, "informativeness must lie in [0, 1]");
    if (dims[i] == 0 || frames[i] < 2)
      fail(Status::usage, Reason::parameter, "synth views need dim >= 1 and frames >= 2");
    total += informativeness[i];
  }
  if (total > 1.0 + 1e-9)
    fail(Status::usage, Reason::parameter, "informativeness values must sum to at most 1");
  if (n_train + n_dev + n_eval == 0)
    fail(Status::usage, Reason::parameter, "synth spec generates no samples");
  if (!(noise > 0.0) || !(signal >= 0.0) || !(frame_rate > 0.0))
    fail(Status::usage, Reason::parameter, "synth noise and frame_rate must be positive");
}

namespace {

template <typename T>
std::vector<T> split_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof())
      fail(Status::usage, Reason::parameter, "synth " + key + ": bad entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

template <typename T>
void scalar(const pt::ptree& s, const std::string& key, T& out) {
  if (auto v = s.get_optional<std::string>(key)) {
    std::istringstream is(*v);
    T parsed{};
    if (!(is >> parsed) || !(is >> std::ws).eof())
      fail(Status::usage, Reason::parameter, "synth " + key + ": bad value '" + *v + "'");
    out = parsed;
  }
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& ini_text) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(Status::usage, Reason::parameter, std::string("synth spec: ") + e.what());
  }
  static const std::set<std::string> known{"names", "informativeness", "dims", "frames",
                                           "n_train", "n_dev", "n_eval", "signal",
                                           "noise", "frame_rate", "seed"};
  for (const auto& [section, body] : tree) {
    if (section != "synth")
      fail(Status::usage, Reason::parameter, "synth spec: unknown section [" + section + "]");
    for (const auto& [key, v] : body)
      if (!known.count(key))
        fail(Status::usage, Reason::parameter, "synth spec: unknown key '" + key + "'");
  }
  SynthSpec s;
  const auto sec = tree.get_child_optional("synth");
  if (!sec) fail(Status::usage, Reason::parameter, "synth spec needs a [synth] section");
  if (auto v = sec->get_optional<std::string>("names")) {
    s.names.clear();
    std::istringstream is(*v);
    std::string item;
    while (std::getline(is, item, ',')) {
      const auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
      s.names.push_back(a == std::string::npos ? "" : item.substr(a, b - a + 1));
    }
  }
  if (auto v = sec->get_optional<std::string>("informativeness"))
    s.informativeness = split_list<double>("informativeness", *v);
  if (auto v = sec->get_optional<std::string>("dims"))
    s.dims = split_list<std::size_t>("dims", *v);
  if (auto v = sec->get_optional<std::string>("frames"))
    s.frames = split_list<std::size_t>("frames", *v);
  // Scalars given for a shorter/longer view list broadcast from one entry.
  const std::size_t n = s.names.size();
  if (s.dims.size() == 1 && n > 1) s.dims.assign(n, s.dims[0]);
  if (s.frames.size() == 1 && n > 1) s.frames.assign(n, s.frames[0]);
  scalar(*sec, "n_train", s.n_train);
  scalar(*sec, "n_dev", s.n_dev);
  scalar(*sec, "n_eval", s.n_eval);
  scalar(*sec, "signal", s.signal);
  scalar(*sec, "noise", s.noise);
  scalar(*sec, "frame_rate", s.frame_rate);
  scalar(*sec, "seed", s.seed);
  s.validate();
  return s;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_synth_spec(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const Error& e) {
    throw Error(e.status(), e.reason(), path.string() + ": " + e.what());
  }
}

double synth_bayes_eer(const SynthSpec& spec, std::size_t view) {
  const double snr = spec.signal * spec.informativeness.at(view) *
                     std::sqrt(static_cast<double>(spec.dims[view] * spec.frames[view])) /
                     spec.noise;
  return 0.5 * std::erfc(snr / std::sqrt(2.0));
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t V = spec.n_views();
  // Templates: positive-mean random profiles rescaled to unit RMS.
  std::vector<std::vector<double>> templ(V);
  for (std::size_t v = 0; v < V; ++v) {
    CounterRng r(spec.seed, 1000 + v);
    double ss = 0.0;
    for (std::size_t d = 0; d < spec.dims[v]; ++d) {
      const double g = std::abs(1.0 + 0.5 * r.normal());
      templ[v].push_back(g);
      ss += g * g;
    }
    const double rms = std::sqrt(ss / static_cast<double>(spec.dims[v]));
    for (auto& g : templ[v]) g /= rms;
  }

  SynthData out;
  auto fill = [&](Dataset& ds, const char* prefix, std::size_t count, std::uint64_t split_id) {
    for (std::size_t i = 0; i < count; ++i) {
      const int label = static_cast<int>(i % 2);
      const double y = label == 0 ? 1.0 : -1.0;
      std::vector<FeatureTensor> views;
      for (std::size_t v = 0; v < V; ++v) {
        // One stream per (split, sample, view): any sample can be regenerated alone.
        CounterRng r(spec.seed, (split_id << 48) ^ (static_cast<std::uint64_t>(i) << 8) ^ v);
        FeatureTensor f;
        f.name = spec.names[v];
        f.dims = {spec.dims[v], spec.frames[v]};
        f.frame_rate = spec.frame_rate;
        f.data.resize(spec.dims[v] * spec.frames[v]);
        const double amp = y * spec.signal * spec.informativeness[v];
        for (std::size_t d = 0; d < spec.dims[v]; ++d)
          for (std::size_t t = 0; t < spec.frames[v]; ++t)
            f.data[d * spec.frames[v] + t] =
                static_cast<float>(amp * templ[v][d] + spec.noise * r.normal());
        views.push_back(std::move(f));
      }
      ds.append(fmt::format("{}_{:05d}", prefix, i), label, views);
    }
  };
  fill(out.train, "train", spec.n_train, 1);
  fill(out.dev, "dev", spec.n_dev, 2);
  fill(out.eval, "eval", spec.n_eval, 3);
  return out;
}

std::filesystem::path write_synth(const SynthSpec& spec, const SynthData& data,
                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& name : spec.names) std::filesystem::create_directories(dir / name);
  DatasetManifest m;
  m.base_dir = dir;
  auto emit = [&](const Dataset& ds, Split split) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      ManifestRecord rec;
      rec.id = ds.ids[i];
      rec.label = static_cast<Label>(ds.labels[i]);
      rec.split = split;
      for (std::size_t v = 0; v < ds.views.size(); ++v) {
        const auto& vs = ds.views[v];
        FeatureTensor f;
        f.name = vs.name;
        f.dims = {vs.dim, vs.frames};
        f.frame_rate = vs.frame_rate;
        f.data.resize(vs.dim * vs.frames);
        const float* src = ds.values[v].data() + i * ds.sample_size(v);
        for (std::size_t t = 0; t < vs.frames; ++t)
          for (std::size_t d = 0; d < vs.dim; ++d) f.data[d * vs.frames + t] = src[t * vs.dim + d];
        const auto rel = std::filesystem::path(vs.name) / (rec.id + ".addf");
        write_feature_file(f, dir / rel);
        rec.feature_paths[vs.name] = rel.generic_string();
      }
      m.records.push_back(std::move(rec));
    }
  };
  emit(data.train, Split::train);
  emit(data.dev, Split::dev);
  emit(data.eval, Split::eval);
  const auto path = dir / "manifest.jsonl";
  save_manifest(m, path);
  return path;
}

}  // namespace addlab
