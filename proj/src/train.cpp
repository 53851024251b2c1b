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

#include "addlab/train.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <thread>

#include "addlab/error.hpp"

namespace addlab {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr))
    fail(Status::usage, Reason::parameter, "lr must be finite and >= 0");
  if (!(weight_decay >= 0.0))
    fail(Status::usage, Reason::parameter, "weight_decay must be >= 0");
  if (epochs < 1) fail(Status::usage, Reason::parameter, "epochs must be >= 1");
  if (batch_size < 1) fail(Status::usage, Reason::parameter, "batch_size must be >= 1");
  if (!(tau > 0.0)) fail(Status::usage, Reason::parameter, "tau must be > 0");
}

template <typename Real>
void adam_step(nn::ParameterSet<Real>& ps, AdamState& state, const AdamOptions& opt) {
  auto& items = ps.items();
  if (state.m.empty()) {
    for (const auto& [name, t] : items) {
      state.m.emplace_back(t.numel(), 0.0);
      state.v.emplace_back(t.numel(), 0.0);
    }
  }
  if (state.m.size() != items.size())
    fail(Status::usage, Reason::shape, "optimizer state does not match parameter list");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < items.size(); ++k) {
    auto& [name, t] = items[k];
    auto grad = t.grad();
    if (!grad.empty() && grad.size() != t.numel())
      fail(Status::usage, Reason::shape, "gradient shape mismatch for " + name);
    if (state.m[k].size() != t.numel())
      fail(Status::usage, Reason::shape, "optimizer state shape mismatch for " + name);
    auto p = t.mutable_data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      if (!opt.decoupled) g += opt.weight_decay * static_cast<double>(p[i]);
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
      double step = opt.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
      if (opt.decoupled) step += opt.lr * opt.weight_decay * static_cast<double>(p[i]);
      p[i] = static_cast<Real>(static_cast<double>(p[i]) - step);
    }
  }
}

template void adam_step(nn::ParameterSet<float>&, AdamState&, const AdamOptions&);
template void adam_step(nn::ParameterSet<double>&, AdamState&, const AdamOptions&);

// ---------------------------------------------------------------- JSON

nlohmann::json to_json(const ModelConfig& m) {
  nlohmann::ordered_json views = nlohmann::ordered_json::array();
  for (const auto& v : m.views)
    views.push_back({{"name", v.name}, {"dim", v.dim}, {"frames", v.frames},
                     {"frame_rate", v.frame_rate}});
  nlohmann::ordered_json j;
  j["mode"] = mode_name(m.mode);
  j["views"] = views;
  j["cnn"] = {{"stage_blocks", m.cnn.stage_blocks},
              {"base_channels", m.cnn.base_channels},
              {"num_classes", m.cnn.num_classes},
              {"in_channels", m.cnn.in_channels}};
  j["selection"] = {{"attn_dim", m.selection.attn_dim},
                    {"n_layers", m.selection.n_layers},
                    {"n_heads", m.selection.n_heads},
                    {"keep_bias_init", m.selection.keep_bias_init}};
  j["fusion"] = {{"proj_dim", m.fusion.proj_dim},
                 {"se_reduction", m.fusion.se_reduction},
                 {"te_layers", m.fusion.te_layers},
                 {"te_heads", m.fusion.te_heads},
                 {"te_ff_dim", m.fusion.te_ff_dim}};
  j["share_selection"] = m.share_selection;
  return nlohmann::json::parse(j.dump());
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig m;
    m.mode = parse_mode(j.at("mode").get<std::string>());
    for (const auto& v : j.at("views"))
      m.views.push_back({v.at("name").get<std::string>(), v.at("dim").get<std::size_t>(),
                         v.at("frames").get<std::size_t>(),
                         v.at("frame_rate").get<double>()});
    const auto& c = j.at("cnn");
    m.cnn.stage_blocks = c.at("stage_blocks").get<std::vector<std::size_t>>();
    m.cnn.base_channels = c.at("base_channels").get<std::size_t>();
    m.cnn.num_classes = c.at("num_classes").get<std::size_t>();
    m.cnn.in_channels = c.at("in_channels").get<std::size_t>();
    const auto& s = j.at("selection");
    m.selection.attn_dim = s.at("attn_dim").get<std::size_t>();
    m.selection.n_layers = s.at("n_layers").get<std::size_t>();
    m.selection.n_heads = s.at("n_heads").get<std::size_t>();
    m.selection.keep_bias_init = s.at("keep_bias_init").get<double>();
    const auto& f = j.at("fusion");
    m.fusion.proj_dim = f.at("proj_dim").get<std::size_t>();
    m.fusion.se_reduction = f.at("se_reduction").get<std::size_t>();
    m.fusion.te_layers = f.at("te_layers").get<std::size_t>();
    m.fusion.te_heads = f.at("te_heads").get<std::size_t>();
    m.fusion.te_ff_dim = f.at("te_ff_dim").get<std::size_t>();
    m.share_selection = j.at("share_selection").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(Status::data, Reason::format, std::string("bad model config: ") + e.what());
  }
}

nlohmann::json to_json(const TrainConfig& t) {
  return {{"lr", t.lr},       {"weight_decay", t.weight_decay},
          {"epochs", t.epochs}, {"batch_size", t.batch_size},
          {"seed", t.seed},   {"tau", t.tau},
          {"decoupled_wd", t.decoupled_wd}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig t;
    t.lr = j.at("lr").get<double>();
    t.weight_decay = j.at("weight_decay").get<double>();
    t.epochs = j.at("epochs").get<std::size_t>();
    t.batch_size = j.at("batch_size").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.tau = j.at("tau").get<double>();
    t.decoupled_wd = j.at("decoupled_wd").get<bool>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(Status::data, Reason::format, std::string("bad train config: ") + e.what());
  }
}

// ---------------------------------------------------------------- log

std::string format_train_log(const TrainLog& log) {
  std::string out;
  nlohmann::json head = log.header;
  head["record"] = "config";
  out += head.dump() + "\n";
  for (const auto& e : log.epochs) {
    nlohmann::ordered_json j;
    j["record"] = "epoch";
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["train_accuracy"] = e.train_accuracy;
    j["val_loss"] = e.val_loss;
    j["keep_rate"] = e.keep_rate;
    out += j.dump() + "\n";
  }
  return out;
}

TrainLog parse_train_log(const std::string& text) {
  TrainLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      const auto kind = j.at("record").get<std::string>();
      if (kind == "config") {
        j.erase("record");
        log.header = std::move(j);
      } else if (kind == "epoch") {
        EpochRecord e;
        e.epoch = j.at("epoch").get<std::size_t>();
        e.train_loss = j.at("train_loss").get<double>();
        e.train_accuracy = j.at("train_accuracy").get<double>();
        e.val_loss = j.at("val_loss").get<double>();
        e.keep_rate = j.at("keep_rate").get<std::vector<double>>();
        log.epochs.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(Status::data, Reason::format,
           "train log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kCkptMagic[4] = {'A', 'D', 'D', 'C'};

template <typename T>
void put(std::vector<std::byte>& out, T v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_bytes(std::vector<std::byte>& out, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::byte*>(data);
  out.insert(out.end(), p, p + n);
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::byte> b) : b_(b) {}
  const std::byte* take(std::size_t n) {
    if (b_.size() - pos_ < n)
      fail(Status::data, Reason::truncated, "checkpoint truncated");
    const std::byte* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const std::byte> b_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint snapshot(const Detector<float>& model) {
  Checkpoint c;
  c.model = model.config();
  const auto ps = model.parameters();
  for (const auto& [name, t] : ps.items())
    c.params.push_back({name, t.shape(), std::vector<float>(t.data().begin(), t.data().end())});
  return c;
}

void restore(Detector<float>& model, const Checkpoint& ckpt) {
  auto ps = model.parameters();
  auto& items = ps.items();
  if (items.size() != ckpt.params.size())
    fail(Status::data, Reason::incompatible,
         "checkpoint has " + std::to_string(ckpt.params.size()) +
             " parameters, model expects " + std::to_string(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& [name, t] = items[i];
    const auto& p = ckpt.params[i];
    if (p.name != name || p.shape != t.shape())
      fail(Status::data, Reason::incompatible,
           "checkpoint parameter " + p.name + " " + to_string(p.shape) +
               " does not match model parameter " + name + " " + to_string(t.shape()));
    std::copy(p.values.begin(), p.values.end(), t.mutable_data().begin());
  }
}

Detector<float> build_detector(const Checkpoint& ckpt) {
  Detector<float> model(ckpt.model, ckpt.train.seed);
  restore(model, ckpt);
  return model;
}

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json meta;
  meta["model"] = to_json(ckpt.model);
  meta["train"] = to_json(ckpt.train);
  meta["epoch"] = ckpt.epoch;
  meta["val_loss"] = ckpt.val_loss;
  meta["rng"] = {{"key", ckpt.rng.key}, {"counter", ckpt.rng.counter}};
  const std::string meta_text = meta.dump();

  std::vector<std::byte> out;
  put_bytes(out, kCkptMagic, 4);
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
  put_bytes(out, meta_text.data(), meta_text.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    if (numel(p.shape) != p.values.size())
      fail(Status::usage, Reason::shape, "checkpoint parameter " + p.name + " size mismatch");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    put_bytes(out, p.name.data(), p.name.size());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.shape.size()));
    for (auto d : p.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    put_bytes(out, p.values.data(), p.values.size() * sizeof(float));
  }
  put<std::uint32_t>(out, crc32(out));
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  Cursor c(bytes);
  if (std::memcmp(c.take(4), kCkptMagic, 4) != 0)
    fail(Status::data, Reason::magic, "not a checkpoint (bad magic)");
  const auto version = c.get<std::uint16_t>();
  if (version != kCheckpointVersion)
    fail(Status::data, Reason::version,
         "checkpoint version " + std::to_string(version) + " is incompatible (expected " +
             std::to_string(kCheckpointVersion) + ")");
  if (bytes.size() < 4 + 2 + 4)
    fail(Status::data, Reason::truncated, "checkpoint truncated");
  // Integrity first: every later parse error on a corrupt file would be noise.
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (bytes.size() < 10 + 4 || crc32(bytes.first(bytes.size() - 4)) != stored)
    fail(Status::data, Reason::checksum, "checkpoint checksum mismatch (corrupt or truncated)");

  Checkpoint ckpt;
  const auto meta_len = c.get<std::uint32_t>();
  const auto* meta_p = reinterpret_cast<const char*>(c.take(meta_len));
  try {
    const auto meta = nlohmann::json::parse(std::string(meta_p, meta_len));
    ckpt.model = model_config_from_json(meta.at("model"));
    ckpt.train = train_config_from_json(meta.at("train"));
    ckpt.epoch = meta.at("epoch").get<std::size_t>();
    ckpt.val_loss = meta.at("val_loss").get<double>();
    ckpt.rng.key = meta.at("rng").at("key").get<std::uint64_t>();
    ckpt.rng.counter = meta.at("rng").at("counter").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Status::data, Reason::format, std::string("checkpoint metadata: ") + e.what());
  }
  const auto n = c.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedArray p;
    const auto len = c.get<std::uint32_t>();
    p.name.assign(reinterpret_cast<const char*>(c.take(len)), len);
    const auto nd = c.get<std::uint8_t>();
    for (std::uint8_t k = 0; k < nd; ++k) p.shape.push_back(c.get<std::uint32_t>());
    const std::size_t count = numel(p.shape);
    if (count > c.remaining() / sizeof(float))
      fail(Status::data, Reason::truncated, "checkpoint truncated in " + p.name);
    p.values.resize(count);
    std::memcpy(p.values.data(), c.take(count * sizeof(float)), count * sizeof(float));
    ckpt.params.push_back(std::move(p));
  }
  if (c.remaining() != 4) fail(Status::data, Reason::format, "trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  atomic_write(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.status(), e.reason(), path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- fit

namespace {

std::vector<std::size_t> batch_starts(std::size_t n, std::size_t bs) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < n; i += bs) s.push_back(i);
  return s;
}

}  // namespace

Predictions predict(const Detector<float>& model, const Dataset& data,
                    std::size_t batch_size, std::size_t jobs) {
  Predictions out;
  out.classes = model.config().cnn.num_classes;
  out.views = model.config().mode == Mode::select ? model.config().views.size() : 0;
  const std::size_t n = data.size();
  out.logits.resize(n * out.classes);
  out.masks.resize(n * out.views);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto starts = batch_starts(n, std::max<std::size_t>(batch_size, 1));
  std::atomic<std::size_t> next{0};
  // Batches are fixed by index, so the result does not depend on `jobs`.
  auto worker = [&] {
    for (std::size_t k = next++; k < starts.size(); k = next++) {
      const std::size_t b0 = starts[k], b1 = std::min(n, b0 + batch_size);
      std::span<const std::size_t> idx(order.data() + b0, b1 - b0);
      auto r = model.forward(data.batch<float>(idx), {GateMode::argmax});
      std::copy(r.logits.data().begin(), r.logits.data().end(),
                out.logits.begin() + static_cast<std::ptrdiff_t>(b0 * out.classes));
      if (out.views)
        std::copy(r.masks.data().begin(), r.masks.data().end(),
                  out.masks.begin() + static_cast<std::ptrdiff_t>(b0 * out.views));
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(starts.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return out;
}

double evaluate_loss(const Detector<float>& model, const Dataset& data,
                     std::size_t batch_size) {
  if (data.size() == 0) fail(Status::data, Reason::empty_input, "empty validation set");
  const auto pred = predict(model, data, batch_size);
  const std::size_t K = pred.classes;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float* z = pred.logits.data() + i * K;
    double mx = z[0];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(z[k]));
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(static_cast<double>(z[k]) - mx);
    total += std::log(s) + mx - z[data.labels[i]];
  }
  return total / static_cast<double>(data.size());
}

FitResult fit(const ModelConfig& model_cfg, const Dataset& train, const Dataset& val,
              const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  train.validate();
  val.validate();
  if (train.size() == 0) fail(Status::data, Reason::empty_input, "empty training set");
  if (val.size() == 0) fail(Status::data, Reason::empty_input, "empty validation set");

  ModelConfig mc = model_cfg;
  if (mc.views.empty()) mc.views = train.views;
  if (mc.views.size() != train.views.size())
    fail(Status::data, Reason::incompatible, "model and dataset disagree on view count");
  for (std::size_t i = 0; i < mc.views.size(); ++i) {
    if (mc.views[i].dim != train.views[i].dim || mc.views[i].frames != train.views[i].frames)
      fail(Status::data, Reason::incompatible,
           "view '" + mc.views[i].name + "' shape differs between config and data");
    if (val.views[i].dim != train.views[i].dim || val.views[i].frames != train.views[i].frames)
      fail(Status::data, Reason::incompatible,
           "view '" + mc.views[i].name + "' shape differs between train and validation");
  }

  Detector<float> model(mc, cfg.seed);
  auto params = model.parameters();
  AdamState adam;
  const AdamOptions aopt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.decoupled_wd};
  CounterRng shuffle_rng(cfg.seed, 1);
  CounterRng gate_rng(cfg.seed, 2);
  const auto tau = static_cast<float>(cfg.tau);

  FitResult res;
  res.log.header = {{"model", to_json(model.config())},
                    {"train", to_json(cfg)},
                    {"n_train", train.size()},
                    {"n_val", val.size()}};
  bool have_best = false;

  const std::size_t n = train.size();
  const std::size_t n_views = mc.views.size();
  std::vector<std::size_t> order(n);
  std::vector<int> labels;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.below(i + 1)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<double> kept(n_views, 0.0);
    std::size_t batch_no = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size, ++batch_no) {
      const std::size_t b1 = std::min(n, b0 + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + b0, b1 - b0);
      labels.clear();
      for (auto i : idx) labels.push_back(train.labels[i]);

      params.zero_grad();
      auto r = model.forward(train.batch<float>(idx), {GateMode::sample, tau, &gate_rng});
      auto loss = ops::cross_entropy(r.logits, std::span<const int>(labels));
      const double lv = loss.item();
      if (!std::isfinite(lv))
        fail(Status::runtime, Reason::nan_loss,
             "non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                 std::to_string(batch_no + 1));
      backward(loss);
      adam_step(params, adam, aopt);

      loss_sum += lv * static_cast<double>(idx.size());
      const std::size_t K = r.logits.dim(1);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto row = r.logits.data().subspan(i * K, K);
        const auto arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        correct += arg == labels[i];
      }
      if (mc.mode == Mode::select)
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t v = 0; v < n_views; ++v) kept[v] += r.masks.at(i * n_views + v);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    rec.val_loss = evaluate_loss(model, val, cfg.batch_size);
    if (!std::isfinite(rec.val_loss))
      fail(Status::runtime, Reason::nan_loss,
           "non-finite validation loss at epoch " + std::to_string(epoch));
    if (mc.mode == Mode::select)
      for (auto k : kept) rec.keep_rate.push_back(k / static_cast<double>(n));
    res.log.epochs.push_back(rec);

    if (!have_best || rec.val_loss < res.best.val_loss) {
      res.best = snapshot(model);
      res.best.train = cfg;
      res.best.epoch = epoch;
      res.best.val_loss = rec.val_loss;
      res.best.rng = gate_rng.state();
      have_best = true;
    }
    if (on_epoch) on_epoch(rec);
  }
  return res;
}

}  // namespace addlab
