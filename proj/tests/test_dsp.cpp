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

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "expect.hpp"
#include "oracles.hpp"
#include "suites.hpp"

#include "addlab/dsp.hpp"
#include "addlab/rng.hpp"

using namespace addlab;
using expect::fails_with;

namespace {

AudioClip sine(double freq, std::size_t n, int rate = 16000, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  for (std::size_t i = 0; i < n; ++i)
    c.samples.push_back(static_cast<float>(
        amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate)));
  return c;
}

AudioClip noise(std::size_t n, std::uint64_t seed) {
  CounterRng r(seed);
  AudioClip c;
  c.sample_rate = 16000;
  for (std::size_t i = 0; i < n; ++i) c.samples.push_back(static_cast<float>(0.3 * r.normal()));
  return c;
}

AudioClip silence(std::size_t n) { return {std::vector<float>(n, 0.0f), 16000}; }

std::size_t argmax_row(const FeatureTensor& f, std::size_t t) {
  std::size_t best = 0;
  for (std::size_t d = 1; d < f.dim(); ++d)
    if (f.at(d, t) > f.at(best, t)) best = d;
  return best;
}

const FrameConfig kFrame;  // 400 / 160 / 512

}  // namespace

TEST_CASE("frame counts") {
  CHECK(kFrame.frame_count(64000) == 398);
  CHECK(kFrame.frame_count(400) == 1);
  CHECK(frame_signal(silence(400), kFrame).rows == 1);
  CHECK(fails_with([] { frame_signal(silence(399), kFrame); }, Reason::too_short));
  const auto m = frame_signal(noise(1000, 1), kFrame);
  CHECK(m.rows == 4);
  CHECK(m.cols == 400);
}

TEST_CASE("frame configuration from milliseconds") {
  const auto f = FrameConfig::from_ms(16000, 25, 10);
  CHECK(f.win_len == 400);
  CHECK(f.hop_len == 160);
  CHECK(f.fft_size == 512);
  FrameConfig bad;
  bad.fft_size = 500;
  CHECK(fails_with([&] { bad.validate(); }, Reason::parameter));
  bad = FrameConfig{};
  bad.hop_len = 401;
  CHECK(fails_with([&] { bad.validate(); }, Reason::parameter));
}

TEST_CASE("FFT matches the naive DFT") {
  for (std::size_t n : {8u, 64u, 512u}) {
    CounterRng r(n);
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {r.normal(), r.normal()};
    const auto ref = oracle::naive_dft(x);
    const auto got = fft(x);
    double num = 0, den = 0;
    for (std::size_t k = 0; k < n; ++k) {
      num = std::max(num, std::abs(got[k] - ref[k]));
      den = std::max(den, std::abs(ref[k]));
    }
    CHECK(num / den < 1e-6);
  }
}

TEST_CASE("power spectrum examples") {
  CHECK(std::ranges::all_of(power_stft(silence(4000), kFrame).data, [](float v) { return v == 0.0f; }));

  // Impulse at t0 inside the first frame: every bin equals window(t0)^2.
  AudioClip imp = silence(400);
  imp.samples[123] = 1.0f;
  const auto p = power_stft(imp, kFrame);
  const double w = hann_window(400)[123];
  for (std::size_t k = 0; k < p.dim(); ++k) CHECK(p.at(k, 0) == doctest::Approx(w * w).epsilon(1e-6));

  // 1 kHz at 16 kHz with a 512-point FFT peaks at bin 1000 / 31.25 = 32.
  const auto s = sine(1000, 4000);
  const auto ps = power_stft(s, kFrame);
  const auto ref = oracle::power_spectrogram(s.samples, 400, 160, 512);
  std::size_t ref_best = 0;
  for (std::size_t k = 0; k < ref.size(); ++k)
    if (ref[k][3] > ref[ref_best][3]) ref_best = k;
  CHECK(ref_best == 32);
  CHECK(argmax_row(ps, 3) == 32);
}

TEST_CASE("Parseval per frame") {
  const auto c = noise(2000, 4);
  const auto p = power_stft(c, kFrame);
  const auto frames = frame_signal(c, kFrame);
  const auto w = hann_window(400);
  for (std::size_t t = 0; t < p.frames(); ++t) {
    double energy = 0;
    for (std::size_t n = 0; n < 400; ++n) energy += std::pow(w[n] * frames(t, n), 2);
    double bins = 0;
    for (std::size_t k = 0; k < p.dim(); ++k)
      bins += (k == 0 || k == 256 ? 1.0 : 2.0) * p.at(k, t);
    CHECK(bins / 512.0 == doctest::Approx(energy).epsilon(1e-6));
  }
}

TEST_CASE("mel scale and filterbank shape") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(std::abs(hz_to_mel(700.0) - 781.17) <= 0.01);
  CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5));

  // The argmax check needs filters at least a bin apart; at 80 filters the
  // lowest ones are narrower than one 31.25 Hz bin.
  for (std::size_t n : {20u, 40u}) {
    const auto fb = mel_filterbank(n, 512, 16000, 0, 8000);
    REQUIRE(fb.rows == n);
    REQUIRE(fb.cols == 257);
    long prev = -1;
    for (std::size_t m = 0; m < n; ++m) {
      std::size_t best = 0, ties = 0;
      for (std::size_t k = 0; k < 257; ++k) {
        CHECK(fb(m, k) >= 0.0);
        if (fb(m, k) > fb(m, best)) best = k;
      }
      for (std::size_t k = 0; k < 257; ++k) ties += fb(m, k) == fb(m, best);
      CHECK(ties == 1);
      CHECK(static_cast<long>(best) > prev);
      prev = static_cast<long>(best);
    }
  }
  const auto fb = mel_filterbank(80, 512, 16000, 0, 8000);
  for (std::size_t k = 1; k < 256; ++k) {
    int covering = 0;
    for (std::size_t m = 0; m < 80; ++m) covering += fb(m, k) > 0;
    CHECK(covering <= 2);
  }
  CHECK(fails_with([] { mel_filterbank(80, 512, 16000, 0, 9000); }, Reason::parameter));
  CHECK(fails_with([] { mel_filterbank(1, 512, 16000, 0, 8000); }, Reason::parameter));
  CHECK(fails_with([] { mel_filterbank(10, 512, 16000, 500, 400); }, Reason::parameter));
}

TEST_CASE("filterbanks equal the direct triangle formula") {
  const auto mel = mel_filterbank(80, 512, 16000, 0, 8000);
  const auto ref = oracle::triangle_bank(oracle::mel_edges(80, 0, 8000), 512, 16000);
  for (std::size_t m = 0; m < 80; ++m)
    for (std::size_t k = 0; k < 257; ++k) REQUIRE(mel(m, k) == doctest::Approx(ref[m][k]).epsilon(1e-12));
  const auto lin = linear_filterbank(20, 512, 16000, 0, 8000);
  const auto lref = oracle::triangle_bank(oracle::linear_edges(20, 0, 8000), 512, 16000);
  for (std::size_t m = 0; m < 20; ++m)
    for (std::size_t k = 0; k < 257; ++k) REQUIRE(lin(m, k) == doctest::Approx(lref[m][k]).epsilon(1e-12));
}

TEST_CASE("feature shapes for a 4 s clip") {
  const auto c = noise(64000, 2);
  const auto mel = mel_spectrogram(c, kFrame, 80);
  CHECK(mel.dims == std::vector<std::size_t>{80, 398});
  CHECK(mel.frame_rate == 100.0);
  CHECK(mel.dim_kind == DimKind::frequency_bin);
  CHECK(log_spectrogram(c, kFrame).dims == std::vector<std::size_t>{257, 398});
  CHECK(mfcc(c, kFrame).dims == std::vector<std::size_t>{20, 398});
  CHECK(mfcc(c, kFrame).dim_kind == DimKind::cepstral_coef);
  CHECK(lfcc(c, kFrame).dims == std::vector<std::size_t>{20, 398});
  const auto q = cqt(c);
  CHECK(q.dims == std::vector<std::size_t>{84, 400});
  CHECK(q.dim_kind == DimKind::cq_bin);
}

TEST_CASE("silence maps to log(eps) everywhere") {
  const auto z = silence(16000);
  const float floor = static_cast<float>(std::log(kLogFloor));
  for (const auto& f : {mel_spectrogram(z, kFrame), log_spectrogram(z, kFrame), cqt(z)})
    CHECK(std::ranges::all_of(f.data, [&](float v) { return v == floor; }));
}

TEST_CASE("DCT matrix is orthonormal and maps constants to coefficient zero") {
  const auto d = dct_matrix(80);
  for (std::size_t i = 0; i < 80; ++i)
    for (std::size_t j = 0; j < 80; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 80; ++k) s += d(i, k) * d(j, k);
      REQUIRE(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-6);
    }
  const double c = -3.5;
  for (std::size_t k = 0; k < 80; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < 80; ++i) s += d(k, i) * c;
    CHECK(s == doctest::Approx(k == 0 ? c * std::sqrt(80.0) : 0.0).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("cepstral extractors on a constant filter-energy column") {
  // Silence gives log(eps) in every filter, a constant column.
  const auto m = mfcc(silence(4000), kFrame);
  const auto l = lfcc(silence(4000), kFrame);
  for (const auto* f : {&m, &l})
    for (std::size_t t = 0; t < f->frames(); ++t) {
      CHECK(f->at(0, t) == doctest::Approx(std::log(kLogFloor) * std::sqrt(f == &m ? 80.0 : 20.0)));
      for (std::size_t k = 1; k < f->dim(); ++k) CHECK(std::abs(f->at(k, t)) < 1e-4);
    }
  CHECK(fails_with([] { mfcc(silence(4000), kFrame, 20, 21); }, Reason::parameter));
  CHECK(fails_with([] { lfcc(silence(4000), kFrame, 20, 21); }, Reason::parameter));
}

TEST_CASE("linear filter centres are equally spaced") {
  const auto c = linear_centers(20, 0, 8000);
  const double bin = 16000.0 / 512;
  for (std::size_t i = 1; i + 1 < c.size(); ++i)
    CHECK(std::abs((c[i + 1] - c[i]) - (c[1] - c[0])) <= bin);
}

TEST_CASE("log spectrogram shifts by log 4 when the waveform doubles") {
  auto c = noise(4000, 8);
  const auto a = log_spectrogram(c, kFrame);
  for (auto& s : c.samples) s *= 2;
  const auto b = log_spectrogram(c, kFrame);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] > std::log(kLogFloor) + 10)
      REQUIRE(b.data[i] - a.data[i] == doctest::Approx(std::log(4.0)).epsilon(1e-4));
}

TEST_CASE("CQT: constant Q, 440 Hz peak, Nyquist check") {
  CqtParams p;
  const double q = p.quality();
  for (std::size_t k = 0; k < p.n_bins; ++k) {
    // Bandwidth implied by the window length, fs / N_k. Rounding N_k up can
    // only raise the ratio, by less than one sample's worth.
    const auto n = static_cast<double>(p.window_length(k, 16000));
    const double ratio = p.center(k) / (16000.0 / n);
    CHECK(ratio >= q * (1 - 1e-12));
    CHECK(ratio < q * n / (n - 1));
    if (n >= 100) CHECK(ratio == doctest::Approx(q).epsilon(0.01));
  }
  const auto s = sine(440, 16000);
  const auto got = cqt(s);
  const auto ref = oracle::cqt(s.samples, 16000, 32.70, 12, 84, 160, kLogFloor);
  const std::size_t t = 50;
  std::size_t ref_best = 0;
  for (std::size_t k = 0; k < 84; ++k)
    if (ref[k][t] > ref[ref_best][t]) ref_best = k;
  CHECK(ref_best == 45);
  CHECK(argmax_row(got, t) == 45);
  CHECK(std::lround(12 * std::log2(440 / 32.70)) == 45);

  CqtParams hi;
  hi.n_bins = 96;  // top bin 8372 Hz is above Nyquist
  CHECK(fails_with([&] { cqt(s, hi); }, Reason::parameter));
}

TEST_CASE("extractors are deterministic and finite") {
  const auto c = noise(8000, 11);
  for (auto kind : {FeatureKind::mel, FeatureKind::mfcc, FeatureKind::logspec, FeatureKind::lfcc,
                    FeatureKind::cqt}) {
    FeatureExtractor ex(kind, 16000, kFrame, {});
    const auto a = ex(c), b = ex(c);
    CHECK(a.data == b.data);
    CHECK(std::ranges::all_of(a.data, [](float v) { return std::isfinite(v); }));
    CHECK(parse_feature_kind(feature_kind_name(kind)) == kind);
  }
  CHECK(fails_with([] { parse_feature_kind("mfcc2"); }, Reason::parameter));
}

TEST_CASE("features match the naive oracles on random clips") {
  for (const auto& o : suites::dsp_suite(2)) {
    INFO(o.name, " rel=", o.rel);
    CHECK(o.rel < (o.name.rfind("fft", 0) == 0 ? 1e-6 : 1e-4));
  }
}
