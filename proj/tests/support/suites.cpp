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

#include "suites.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <string>

#include "addlab/audio.hpp"
#include "addlab/dsp.hpp"
#include "addlab/eval.hpp"
#include "addlab/incorporation.hpp"
#include "addlab/model.hpp"
#include "oracles.hpp"

namespace suites {

using addlab::CounterRng;
using addlab::Shape;
using addlab::Tensor;
namespace ops = addlab::ops;
namespace nn = addlab::nn;
using gradcheck::Built;

namespace {

#define REAL_OF(ctx) typename std::decay_t<decltype(ctx)>::real_type

template <typename Real>
Built<Real> fwd(std::function<Tensor<Real>()> f) {
  return {std::move(f), {}};
}

constexpr int kLabels[] = {0, 2, 1, 2};

void op_cases(std::vector<gradcheck::Outcome>& out, std::size_t n) {
  using gradcheck::run;
  out.push_back(run("add (broadcast)", [](auto& c) {
    auto a = c.input({2, 3, 4}), b = c.input({3, 1});
    return fwd<REAL_OF(c)>([=] { return ops::add(a, b); });
  }, n));
  out.push_back(run("sub (broadcast)", [](auto& c) {
    auto a = c.input({3, 4}), b = c.input({4});
    return fwd<REAL_OF(c)>([=] { return ops::sub(a, b); });
  }, n));
  out.push_back(run("mul (broadcast)", [](auto& c) {
    auto a = c.input({2, 3, 4}), b = c.input({2, 1, 4});
    return fwd<REAL_OF(c)>([=] { return ops::mul(a, b); });
  }, n));
  out.push_back(run("scale", [](auto& c) {
    using R = REAL_OF(c);
    auto x = c.input({5});
    return fwd<R>([=] { return ops::scale(x, R(1.75)); });
  }, n));
  out.push_back(run("relu", [](auto& c) {
    auto x = c.input({4, 5});
    return fwd<REAL_OF(c)>([=] { return ops::relu(x); });
  }, n));
  out.push_back(run("sigmoid", [](auto& c) {
    auto x = c.input({4, 5}, 2.0);
    return fwd<REAL_OF(c)>([=] { return ops::sigmoid(x); });
  }, n));
  out.push_back(run("exp", [](auto& c) {
    auto x = c.input({4, 5}, 0.5);
    return fwd<REAL_OF(c)>([=] { return ops::exp(x); });
  }, n));
  out.push_back(run("log", [](auto& c) {
    auto x = c.uniform({4, 5}, 0.5, 2.0);
    return fwd<REAL_OF(c)>([=] { return ops::log(x); });
  }, n));
  out.push_back(run("matmul (batched)", [](auto& c) {
    auto a = c.input({2, 3, 4}), b = c.input({2, 4, 5});
    return fwd<REAL_OF(c)>([=] { return ops::matmul(a, b); });
  }, n));
  out.push_back(run("matmul (shared rhs)", [](auto& c) {
    auto a = c.input({2, 3, 4}), b = c.input({4, 5});
    return fwd<REAL_OF(c)>([=] { return ops::matmul(a, b); });
  }, n));
  out.push_back(run("linear", [](auto& c) {
    auto x = c.input({2, 3, 4}), w = c.input({4, 5}), b = c.input({5});
    return fwd<REAL_OF(c)>([=] { return ops::linear(x, w, b); });
  }, n));
  out.push_back(run("linear (no bias)", [](auto& c) {
    using R = REAL_OF(c);
    auto x = c.input({3, 4}), w = c.input({4, 2});
    return fwd<R>([=] { return ops::linear(x, w, Tensor<R>()); });
  }, n));
  out.push_back(run("conv2d (stride 1, pad 1)", [](auto& c) {
    auto x = c.input({2, 2, 5, 6}), k = c.input({3, 2, 3, 3}), b = c.input({3});
    return fwd<REAL_OF(c)>([=] { return ops::conv2d(x, k, b, 1, 1); });
  }, n));
  out.push_back(run("conv2d (stride 2, unbatched)", [](auto& c) {
    using R = REAL_OF(c);
    auto x = c.input({2, 7, 7}), k = c.input({2, 2, 3, 3});
    return fwd<R>([=] { return ops::conv2d(x, k, Tensor<R>(), 2, 0); });
  }, n));
  out.push_back(run("avg pool", [](auto& c) {
    auto x = c.input({1, 2, 4, 6});
    return fwd<REAL_OF(c)>([=] { return ops::pool2d(x, ops::PoolKind::avg, 2, 2); });
  }, n));
  out.push_back(run("max pool", [](auto& c) {
    auto x = c.input({2, 2, 4, 4});
    return fwd<REAL_OF(c)>([=] { return ops::pool2d(x, ops::PoolKind::max, 2, 2); });
  }, n));
  out.push_back(run("global avg pool", [](auto& c) {
    auto x = c.input({2, 3, 4, 5});
    return fwd<REAL_OF(c)>([=] { return ops::pool2d(x, ops::PoolKind::global_avg); });
  }, n));
  out.push_back(run("softmax (axis 0)", [](auto& c) {
    auto x = c.input({3, 4, 2});
    return fwd<REAL_OF(c)>([=] { return ops::softmax(x, 0); });
  }, n));
  out.push_back(run("softmax (last axis)", [](auto& c) {
    auto x = c.input({3, 4, 2}, 3.0);
    return fwd<REAL_OF(c)>([=] { return ops::softmax(x, 2); });
  }, n));
  out.push_back(run("layer norm", [](auto& c) {
    auto x = c.input({2, 3, 6}), g = c.input({6}), b = c.input({6});
    return fwd<REAL_OF(c)>([=] { return ops::layer_norm(x, g, b); });
  }, n));
  out.push_back(run("cross entropy", [](auto& c) {
    auto x = c.input({4, 3}, 2.0);
    return fwd<REAL_OF(c)>([=] { return ops::cross_entropy(x, std::span<const int>(kLabels)); });
  }, n));
  out.push_back(run("reshape", [](auto& c) {
    auto x = c.input({2, 3, 4});
    return fwd<REAL_OF(c)>([=] { return ops::reshape(x, Shape{4, 6}); });
  }, n));
  out.push_back(run("permute", [](auto& c) {
    auto x = c.input({2, 3, 4});
    return fwd<REAL_OF(c)>([=] { return ops::permute(x, {2, 0, 1}); });
  }, n));
  out.push_back(run("concat", [](auto& c) {
    auto a = c.input({2, 3, 2}), b = c.input({2, 1, 2});
    return fwd<REAL_OF(c)>([=] { return ops::concat<REAL_OF(c)>({a, b}, 1); });
  }, n));
  out.push_back(run("stack", [](auto& c) {
    auto a = c.input({2, 3}), b = c.input({2, 3});
    return fwd<REAL_OF(c)>([=] { return ops::stack<REAL_OF(c)>({a, b}, 1); });
  }, n));
  out.push_back(run("slice", [](auto& c) {
    auto x = c.input({2, 3, 4});
    return fwd<REAL_OF(c)>([=] { return ops::slice(x, 2, 1, 3); });
  }, n));
  out.push_back(run("select", [](auto& c) {
    auto x = c.input({2, 3, 4});
    return fwd<REAL_OF(c)>([=] { return ops::select(x, 1, 1); });
  }, n));
  out.push_back(run("sum", [](auto& c) {
    auto x = c.input({2, 3, 4});
    return fwd<REAL_OF(c)>([=] { return ops::sum(x); });
  }, n));
  out.push_back(run("mean", [](auto& c) {
    auto x = c.input({2, 3, 4});
    return fwd<REAL_OF(c)>([=] { return ops::mean(x); });
  }, n));
  out.push_back(run("mean over axis", [](auto& c) {
    auto x = c.input({2, 3, 4});
    return fwd<REAL_OF(c)>([=] { return ops::mean_axis(x, 1); });
  }, n));
  // The straight-through forward is piecewise constant, so the differences
  // are taken on softmax((l + G) / tau) with the same Gumbel draws.
  out.push_back(run("gumbel softmax (straight-through)", [](auto& c) {
    using R = REAL_OF(c);
    auto l = c.input({3, 4});
    const R tau = R(0.75);
    Built<R> b;
    b.forward = [=] {
      CounterRng r(5, 9);
      return ops::gumbel_softmax_st(l, tau, r);
    };
    b.reference = [=] {
      CounterRng r(5, 9);
      std::vector<R> g(12);
      for (auto& v : g) v = static_cast<R>(r.gumbel());
      auto y = ops::add(l, Tensor<R>::from({3, 4}, g));
      return ops::softmax(ops::scale(y, R(1) / tau), 1);
    };
    return b;
  }, n));
}

nn::SelectionHeadConfig small_selection() { return {4, 1, 2, 2.0}; }
nn::FusionHeadConfig small_fusion() { return {4, 4, 1, 2, 8}; }

void block_cases(std::vector<gradcheck::Outcome>& out, std::size_t n) {
  using gradcheck::run;
  out.push_back(run("residual block (projection skip)", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 1);
    nn::ResidualBlock<R> blk(2, 3, 2, r, 1.0);
    c.params(blk);
    auto x = c.input({2, 2, 6, 6});
    return fwd<R>([=] { return blk(x); });
  }, n));
  out.push_back(run("residual block (identity skip)", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 2);
    nn::ResidualBlock<R> blk(3, 3, 1, r, 1.0);
    c.params(blk);
    auto x = c.input({1, 3, 5, 5});
    return fwd<R>([=] { return blk(x); });
  }, n));
  out.push_back(run("residual cnn (toy)", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 3);
    nn::ResidualCnn<R> cnn(nn::ResidualCnnConfig{{1, 1}, 2, 2, 2}, r);
    c.params(cnn);
    auto x = c.input({2, 2, 16, 16});
    return fwd<R>([=] { return cnn(x); });
  }, n));
  out.push_back(run("multi-head self-attention", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 4);
    nn::MultiHeadSelfAttention<R> mha(6, 2, r);
    c.params(mha);
    auto x = c.input({2, 4, 6});
    return fwd<R>([=] { return mha(x); });
  }, n));
  out.push_back(run("transformer encoder layer", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 5);
    nn::TransformerEncoderLayer<R> te(6, 2, 8, r);
    c.params(te);
    auto x = c.input({2, 3, 6});
    return fwd<R>([=] { return te(x); });
  }, n));
  out.push_back(run("channel attention", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 6);
    nn::ChannelAttention<R> ca(3, 2, r);
    c.params(ca);
    auto x = c.input({2, 3, 4, 5});
    return fwd<R>([=] { return ca(x).y; });
  }, n));
  out.push_back(run("selection head", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 7);
    nn::SelectionHead<R> head(5, small_selection(), r);
    c.params(head);
    auto x = c.input({2, 3, 5});
    return fwd<R>([=] { return head(x); });
  }, n));
  out.push_back(run("view aligner", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 8);
    addlab::ViewAligner<R> al({{"a", 5, 6, 100.0}, {"b", 3, 4, 100.0}}, 4, r);
    c.params(al);
    auto xa = c.input({2, 6, 5}), xb = c.input({2, 4, 3});
    return fwd<R>([=] {
      return addlab::concat_views(al(addlab::MultiViewBatch<R>{{xa, xb}, {"a", "b"}}));
    });
  }, n));
  out.push_back(run("selection (noiseless gates)", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 9);
    std::vector<nn::SelectionHead<R>> heads;
    heads.emplace_back(4, small_selection(), r);
    heads.emplace_back(4, small_selection(), r);
    for (const auto& h : heads) c.params(h);
    std::vector<Tensor<R>> al{c.input({2, 3, 4}), c.input({2, 3, 4})};
    return fwd<R>([=] {
      return addlab::select_features(al, heads, addlab::GateMode::argmax, R(1), nullptr)
          .features;
    });
  }, n));
  // Sampled gates: the surrogate replaces each hard gate by
  // hard + sigmoid((l0 - l1 + g0 - g1) / tau) - soft_at_start, whose value
  // equals the hard gate and whose slope is the straight-through slope.
  out.push_back(run("selection (sampled gates)", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 10);
    std::vector<nn::SelectionHead<R>> heads;
    heads.emplace_back(4, small_selection(), r);
    heads.emplace_back(4, small_selection(), r);
    for (const auto& h : heads) c.params(h);
    std::vector<Tensor<R>> al{c.input({2, 3, 4}), c.input({2, 3, 4})};
    const R tau = R(0.5);
    const std::size_t B = 2;
    std::vector<std::vector<R>> gdiff(2, std::vector<R>(B)), offset(2, std::vector<R>(B));
    {
      CounterRng g(3, 3);
      for (std::size_t i = 0; i < 2; ++i) {
        auto l = heads[i](al[i]);
        for (std::size_t b = 0; b < B; ++b) {
          const R g0 = static_cast<R>(g.gumbel()), g1 = static_cast<R>(g.gumbel());
          const R y0 = (l.at(2 * b) + g0) / tau, y1 = (l.at(2 * b + 1) + g1) / tau;
          const R hard = y1 > y0 ? R(0) : R(1);
          gdiff[i][b] = g0 - g1;
          offset[i][b] = hard - R(1) / (R(1) + std::exp(y1 - y0));
        }
      }
    }
    Built<R> b;
    b.forward = [=] {
      CounterRng g(3, 3);
      return addlab::select_features(al, heads, addlab::GateMode::sample, tau, &g).features;
    };
    b.reference = [=] {
      std::vector<Tensor<R>> gated;
      for (std::size_t i = 0; i < 2; ++i) {
        auto l = heads[i](al[i]);
        auto d = ops::sub(ops::select(l, 1, 0), ops::select(l, 1, 1));
        d = ops::add(d, Tensor<R>::from({B}, gdiff[i]));
        auto m = ops::add(ops::sigmoid(ops::scale(d, R(1) / tau)),
                          Tensor<R>::from({B}, offset[i]));
        gated.push_back(ops::mul(al[i], ops::reshape(m, Shape{B, 1, 1})));
      }
      return ops::stack(gated, 1);
    };
    return b;
  }, n));
  out.push_back(run("fusion head", [](auto& c) {
    using R = REAL_OF(c);
    CounterRng r(1, 11);
    addlab::FusionHead<R> head(2, small_fusion(), r);
    c.params(head);
    std::vector<Tensor<R>> al{c.input({2, 3, 4}), c.input({2, 3, 4})};
    return fwd<R>([=] { return addlab::fuse_features(al, head); });
  }, n));
}

#undef REAL_OF

// Random test clip: a few sinusoids plus white noise, peak below 1.
addlab::AudioClip random_clip(std::uint64_t seed) {
  CounterRng r(seed, 0x636c6970);
  addlab::AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(16000);
  double f[3], a[3], ph[3];
  for (int i = 0; i < 3; ++i) {
    f[i] = 50.0 + 7000.0 * r.uniform();
    a[i] = 0.25 * r.uniform();
    ph[i] = 6.283185307179586 * r.uniform();
  }
  for (std::size_t n = 0; n < clip.samples.size(); ++n) {
    double s = 0.05 * r.normal();
    for (int i = 0; i < 3; ++i)
      s += a[i] * std::sin(6.283185307179586 * f[i] * static_cast<double>(n) / 16000.0 + ph[i]);
    clip.samples[n] = static_cast<float>(std::clamp(s, -1.0, 1.0));
  }
  return clip;
}

}  // namespace

std::vector<gradcheck::Outcome> gradient_suite(std::size_t trials) {
  std::vector<gradcheck::Outcome> out;
  op_cases(out, trials);
  block_cases(out, trials);
  return out;
}

std::vector<DspOutcome> dsp_suite(std::size_t clips) {
  using addlab::FeatureExtractor;
  using addlab::FeatureKind;
  const addlab::FrameConfig frame;  // 400 / 160 / 512
  const addlab::FeatureParams p;
  const double fs = 16000.0;

  std::vector<DspOutcome> out;
  for (std::size_t n : {8u, 64u, 512u}) {
    CounterRng r(n, 0x666674);
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {r.normal(), r.normal()};
    const auto ref = oracle::naive_dft(x);
    const auto got = addlab::fft(x);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      num = std::max(num, std::abs(got[k] - ref[k]));
      den = std::max(den, std::abs(ref[k]));
    }
    out.push_back({"fft n=" + std::to_string(n), num / den});
  }

  const auto mel_bank = oracle::triangle_bank(oracle::mel_edges(p.n_mels, p.fmin, p.fmax),
                                              frame.fft_size, fs);
  const auto lin_bank = oracle::triangle_bank(
      oracle::linear_edges(p.n_lfcc_filters, p.fmin, p.fmax), frame.fft_size, fs);
  const FeatureKind kinds[] = {FeatureKind::mel, FeatureKind::mfcc, FeatureKind::logspec,
                               FeatureKind::lfcc, FeatureKind::cqt};
  std::vector<double> worst(5, 0.0);
  for (std::size_t c = 0; c < clips; ++c) {
    const auto clip = random_clip(c);
    const auto power = oracle::power_spectrogram(clip.samples, frame.win_len, frame.hop_len,
                                                 frame.fft_size);
    const auto log_mel = oracle::log_bank(mel_bank, power, addlab::kLogFloor);
    const auto log_lin = oracle::log_bank(lin_bank, power, addlab::kLogFloor);
    for (std::size_t k = 0; k < 5; ++k) {
      const auto got = FeatureExtractor(kinds[k], 16000, frame, p)(clip);
      oracle::Grid ref;
      switch (kinds[k]) {
        case FeatureKind::mel: ref = log_mel; break;
        case FeatureKind::mfcc: ref = oracle::dct_rows(log_mel, p.n_mfcc); break;
        case FeatureKind::logspec: ref = oracle::log_grid(power, addlab::kLogFloor); break;
        case FeatureKind::lfcc: ref = oracle::dct_rows(log_lin, p.n_lfcc); break;
        case FeatureKind::cqt:
          ref = oracle::cqt(clip.samples, fs, p.cqt_fmin, p.cqt_bins_per_octave, p.cqt_bins,
                            frame.hop_len, addlab::kLogFloor);
          break;
      }
      double rel = 1.0;
      if (got.dims.size() == 2 && got.dims[0] == ref.size() && got.dims[1] == ref[0].size())
        rel = oracle::rel_err(got.data, ref);
      worst[k] = std::max(worst[k], rel);
    }
  }
  for (std::size_t k = 0; k < 5; ++k) out.push_back({addlab::feature_kind_name(kinds[k]), worst[k]});
  return out;
}

namespace {

addlab::ScoreSet random_scores(CounterRng& r) {
  addlab::ScoreSet s;
  const std::size_t ng = 1 + r.below(60), ns = 1 + r.below(60);
  // Coarse grids force ties within and across classes.
  const double grid = r.uniform() < 0.5 ? 16.0 : 4096.0;
  const double shift = r.uniform();
  for (std::size_t i = 0; i < ng + ns; ++i) {
    const bool genuine = i < ng;
    const double raw = r.normal() + (genuine ? shift : -shift);
    s.entries.push_back({"u" + std::to_string(i), std::round(raw * grid) / grid,
                         genuine ? addlab::Label::genuine : addlab::Label::spoof});
  }
  return s;
}

std::uint64_t bits(double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, sizeof u);
  return u;
}

}  // namespace

EerOutcome eer_suite(std::size_t sets, std::size_t transforms) {
  EerOutcome o;
  CounterRng r(2024, 0x656572);
  for (std::size_t i = 0; i < sets; ++i) {
    const auto s = random_scores(r);
    std::vector<double> g, sp;
    for (const auto& e : s.entries) (e.label == addlab::Label::genuine ? g : sp).push_back(e.score);
    const double diff = std::abs(addlab::compute_eer(s).eer - oracle::eer(g, sp));
    o.max_abs_diff = std::max(o.max_abs_diff, diff);
    ++o.sets;
  }
  for (std::size_t i = 0; i < transforms; ++i) {
    const auto s = random_scores(r);
    // Strictly increasing maps that stay injective on the score grids.
    const double a = 0.1 + 10.0 * r.uniform(), b = 5.0 * r.normal();
    auto f = [&](double x) {
      switch (i % 4) {
        case 0: return a * x + b;
        case 1: return std::exp(0.5 * x) + b;
        case 2: return 1.0 / (1.0 + std::exp(-x));
        default: return x * x * x + a * x;
      }
    };
    addlab::ScoreSet t = s;
    for (auto& e : t.entries) e.score = f(e.score);
    if (bits(addlab::compute_eer(t).eer) != bits(addlab::compute_eer(s).eer))
      ++o.invariance_failures;
    ++o.transforms;
  }
  return o;
}

}  // namespace suites
