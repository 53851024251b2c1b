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

#include "addlab/config.hpp"

#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "addlab/error.hpp"
#include "addlab/featureio.hpp"

namespace addlab {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"audio", {"sample_rate", "duration_s"}},
      {"framing", {"win_ms", "hop_ms", "fft"}},
      {"features",
       {"n_mels", "n_mfcc", "n_lfcc_filters", "n_lfcc", "fmin", "fmax", "cqt_fmin",
        "cqt_bins_per_octave", "cqt_bins"}},
      {"model",
       {"mode", "stage_blocks", "base_channels", "proj_dim", "attn_dim", "sel_layers",
        "sel_heads", "keep_bias_init", "share_selection", "se_reduction", "te_layers",
        "te_heads", "te_ff_dim"}},
      {"train", {"lr", "weight_decay", "epochs", "batch_size", "seed", "tau", "decoupled_wd"}},
  };
  return keys;
}

template <typename T>
void read(const pt::ptree& tree, const std::string& key, T& out) {
  const auto v = tree.get_optional<std::string>(key);
  if (!v) return;
  std::istringstream in(*v);
  T parsed{};
  if constexpr (std::is_same_v<T, bool>) {
    std::string s;
    in >> s;
    if (s == "true" || s == "1" || s == "yes") {
      parsed = true;
    } else if (s == "false" || s == "0" || s == "no") {
      parsed = false;
    } else {
      fail(Status::usage, Reason::parameter, "config " + key + ": expected a boolean, got '" + *v + "'");
    }
  } else {
    in >> parsed;
    if (!in || !(in >> std::ws).eof())
      fail(Status::usage, Reason::parameter, "config " + key + ": cannot parse '" + *v + "'");
    if constexpr (std::is_unsigned_v<T>)
      if (v->find('-') != std::string::npos)
        fail(Status::usage, Reason::parameter, "config " + key + " must be non-negative");
  }
  out = parsed;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const auto trimmed = item.substr(item.find_first_not_of(' '));
      out.push_back(std::stoul(trimmed, &used));
      if (trimmed.find_first_not_of(' ', used) != std::string::npos || trimmed[0] == '-')
        throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(Status::usage, Reason::parameter, "config " + key + ": bad list '" + text + "'");
    }
  }
  if (out.empty()) fail(Status::usage, Reason::parameter, "config " + key + " is empty");
  return out;
}

}  // namespace

FrameConfig PipelineConfig::frame() const {
  auto f = FrameConfig::from_ms(sample_rate, win_ms, hop_ms);
  f.fft_size = fft;
  return f;
}

void PipelineConfig::validate() const {
  if (sample_rate <= 0) fail(Status::usage, Reason::parameter, "sample_rate must be positive");
  if (!(duration_s > 0)) fail(Status::usage, Reason::parameter, "duration_s must be positive");
  frame().validate();
  train.validate();
  model.cnn.validate();
  model.selection.validate();
  model.fusion.validate();
}

PipelineConfig parse_config(const std::string& ini_text) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(Status::usage, Reason::parameter, std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    auto it = known_keys().find(section);
    if (it == known_keys().end())
      fail(Status::usage, Reason::parameter, "config: unknown section [" + section + "]");
    if (body.empty() && !body.data().empty())
      fail(Status::usage, Reason::parameter, "config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body)
      if (!it->second.count(key))
        fail(Status::usage, Reason::parameter,
             "config: unknown key '" + key + "' in [" + section + "]");
  }

  PipelineConfig c;
  read(tree, "audio.sample_rate", c.sample_rate);
  read(tree, "audio.duration_s", c.duration_s);
  read(tree, "framing.win_ms", c.win_ms);
  read(tree, "framing.hop_ms", c.hop_ms);
  if (!tree.get_optional<std::string>("framing.fft")) c.fft = c.frame().fft_size;
  read(tree, "framing.fft", c.fft);
  auto& f = c.features;
  read(tree, "features.n_mels", f.n_mels);
  read(tree, "features.n_mfcc", f.n_mfcc);
  read(tree, "features.n_lfcc_filters", f.n_lfcc_filters);
  read(tree, "features.n_lfcc", f.n_lfcc);
  read(tree, "features.fmin", f.fmin);
  read(tree, "features.fmax", f.fmax);
  read(tree, "features.cqt_fmin", f.cqt_fmin);
  read(tree, "features.cqt_bins_per_octave", f.cqt_bins_per_octave);
  read(tree, "features.cqt_bins", f.cqt_bins);
  auto& m = c.model;
  if (auto mode = tree.get_optional<std::string>("model.mode")) m.mode = parse_mode(*mode);
  if (auto sb = tree.get_optional<std::string>("model.stage_blocks"))
    m.cnn.stage_blocks = parse_list("model.stage_blocks", *sb);
  read(tree, "model.base_channels", m.cnn.base_channels);
  read(tree, "model.proj_dim", m.fusion.proj_dim);
  read(tree, "model.attn_dim", m.selection.attn_dim);
  read(tree, "model.sel_layers", m.selection.n_layers);
  read(tree, "model.sel_heads", m.selection.n_heads);
  read(tree, "model.keep_bias_init", m.selection.keep_bias_init);
  read(tree, "model.share_selection", m.share_selection);
  read(tree, "model.se_reduction", m.fusion.se_reduction);
  read(tree, "model.te_layers", m.fusion.te_layers);
  read(tree, "model.te_heads", m.fusion.te_heads);
  read(tree, "model.te_ff_dim", m.fusion.te_ff_dim);
  auto& t = c.train;
  read(tree, "train.lr", t.lr);
  read(tree, "train.weight_decay", t.weight_decay);
  read(tree, "train.epochs", t.epochs);
  read(tree, "train.batch_size", t.batch_size);
  read(tree, "train.seed", t.seed);
  read(tree, "train.tau", t.tau);
  read(tree, "train.decoupled_wd", t.decoupled_wd);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_config(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const Error& e) {
    throw Error(e.status(), e.reason(), path.string() + ": " + e.what());
  }
}

std::string format_config(const PipelineConfig& c) {
  const auto& f = c.features;
  const auto& m = c.model;
  const auto& t = c.train;
  std::string out;
  out += fmt::format("[audio]\nsample_rate = {}\nduration_s = {}\n\n", c.sample_rate, c.duration_s);
  out += fmt::format("[framing]\nwin_ms = {}\nhop_ms = {}\nfft = {}\n\n", c.win_ms, c.hop_ms, c.fft);
  out += fmt::format(
      "[features]\nn_mels = {}\nn_mfcc = {}\nn_lfcc_filters = {}\nn_lfcc = {}\n"
      "fmin = {}\nfmax = {}\ncqt_fmin = {}\ncqt_bins_per_octave = {}\ncqt_bins = {}\n\n",
      f.n_mels, f.n_mfcc, f.n_lfcc_filters, f.n_lfcc, f.fmin, f.fmax, f.cqt_fmin,
      f.cqt_bins_per_octave, f.cqt_bins);
  out += fmt::format(
      "[model]\nmode = {}\nstage_blocks = {}\nbase_channels = {}\nproj_dim = {}\n"
      "attn_dim = {}\nsel_layers = {}\nsel_heads = {}\nkeep_bias_init = {}\n"
      "share_selection = {}\nse_reduction = {}\nte_layers = {}\nte_heads = {}\n"
      "te_ff_dim = {}\n\n",
      mode_name(m.mode), fmt::join(m.cnn.stage_blocks, ","), m.cnn.base_channels,
      m.fusion.proj_dim, m.selection.attn_dim, m.selection.n_layers, m.selection.n_heads,
      m.selection.keep_bias_init, m.share_selection, m.fusion.se_reduction,
      m.fusion.te_layers, m.fusion.te_heads, m.fusion.te_ff_dim);
  out += fmt::format(
      "[train]\nlr = {}\nweight_decay = {}\nepochs = {}\nbatch_size = {}\nseed = {}\n"
      "tau = {}\ndecoupled_wd = {}\n",
      t.lr, t.weight_decay, t.epochs, t.batch_size, t.seed, t.tau, t.decoupled_wd);
  return out;
}

nlohmann::json to_json(const PipelineConfig& c) {
  const auto& f = c.features;
  return {{"audio", {{"sample_rate", c.sample_rate}, {"duration_s", c.duration_s}}},
          {"framing", {{"win_ms", c.win_ms}, {"hop_ms", c.hop_ms}, {"fft", c.fft}}},
          {"features",
           {{"n_mels", f.n_mels},
            {"n_mfcc", f.n_mfcc},
            {"n_lfcc_filters", f.n_lfcc_filters},
            {"n_lfcc", f.n_lfcc},
            {"fmin", f.fmin},
            {"fmax", f.fmax},
            {"cqt_fmin", f.cqt_fmin},
            {"cqt_bins_per_octave", f.cqt_bins_per_octave},
            {"cqt_bins", f.cqt_bins}}},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)}};
}

}  // namespace addlab
