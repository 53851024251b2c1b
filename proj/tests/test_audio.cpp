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

#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "expect.hpp"
#include "oracles.hpp"

#include "addlab/audio.hpp"
#include "addlab/rng.hpp"

using namespace addlab;
using expect::fails_with;

namespace {

AudioClip sine(double freq, int rate, std::size_t n, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  for (std::size_t i = 0; i < n; ++i)
    c.samples.push_back(static_cast<float>(
        amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate)));
  return c;
}

double rms(const std::vector<float>& x, std::size_t from, std::size_t to) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += static_cast<double>(x[i]) * x[i];
  return std::sqrt(s / static_cast<double>(to - from));
}

// Minimal RIFF writer independent of the library encoder.
std::vector<std::byte> riff(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                            std::uint16_t bits, const std::vector<std::byte>& payload) {
  std::vector<std::byte> out;
  auto put = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out.insert(out.end(), b, b + n);
  };
  auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  put("RIFF", 4);
  u32(static_cast<std::uint32_t>(36 + payload.size()));
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  put("data", 4);
  u32(static_cast<std::uint32_t>(payload.size()));
  put(payload.data(), payload.size());
  return out;
}

template <typename T>
std::vector<std::byte> raw(const std::vector<T>& v) {
  std::vector<std::byte> b(v.size() * sizeof(T));
  std::memcpy(b.data(), v.data(), b.size());
  return b;
}

}  // namespace

TEST_CASE("decode_wav: silent PCM16 file") {
  const auto clip = decode_wav(riff(1, 1, 16000, 16, raw(std::vector<std::int16_t>(64000, 0))));
  CHECK(clip.sample_rate == 16000);
  REQUIRE(clip.samples.size() == 64000);
  for (float s : clip.samples) REQUIRE(s == 0.0f);
}

TEST_CASE("decode_wav: PCM16 scaling and stereo averaging") {
  auto clip = decode_wav(riff(1, 1, 8000, 16, raw(std::vector<std::int16_t>{32767, -32768})));
  CHECK(clip.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-9));
  CHECK(clip.samples[1] == -1.0f);

  clip = decode_wav(riff(3, 2, 8000, 32, raw(std::vector<float>{0.5f, -0.5f, 0.25f, 0.75f})));
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == 0.0f);
  CHECK(clip.samples[1] == 0.5f);
}

TEST_CASE("decode_wav: malformed and unsupported inputs") {
  auto bytes = riff(1, 1, 16000, 16, raw(std::vector<std::int16_t>(10, 1)));
  auto bad_magic = bytes;
  std::memcpy(bad_magic.data(), "RIFX", 4);
  CHECK(fails_with([&] { decode_wav(bad_magic); }, Reason::decode));
  CHECK(fails_with([&] { decode_wav(std::span(bytes).first(20)); }, Reason::decode));
  CHECK(fails_with([&] { decode_wav(riff(1, 1, 16000, 24, raw(std::vector<std::int16_t>(9, 0)))); },
                   Reason::unsupported_format));
  CHECK(fails_with([&] { decode_wav(riff(6, 1, 16000, 8, raw(std::vector<std::int16_t>(4, 0)))); },
                   Reason::unsupported_format));
  CHECK(fails_with([&] { decode_wav(riff(1, 3, 16000, 16, raw(std::vector<std::int16_t>(9, 0)))); },
                   Reason::unsupported_format));
}

TEST_CASE("PCM16 round trip stays within one LSB") {
  CounterRng r(3);
  AudioClip c;
  c.sample_rate = 22050;
  for (int i = 0; i < 5000; ++i) c.samples.push_back(static_cast<float>(2 * r.uniform() - 1));
  const auto back = decode_wav(encode_wav_pcm16(c));
  REQUIRE(back.samples.size() == c.samples.size());
  CHECK(back.sample_rate == 22050);
  for (std::size_t i = 0; i < c.samples.size(); ++i)
    REQUIRE(std::abs(back.samples[i] - c.samples[i]) <= 1.0 / 32768.0);

  const auto f = decode_wav(encode_wav_float32(c));
  CHECK(f.samples == c.samples);
}

TEST_CASE("resample: lengths and identity") {
  AudioClip c = sine(440, 8000, 8000);
  auto up = resample(c, 16000);
  CHECK(up.sample_rate == 16000);
  CHECK(up.samples.size() == 16000);
  CHECK(resample(c, 8000).samples == c.samples);
  CHECK(resample(sine(100, 44100, 1001), 16000).samples.size() ==
        static_cast<std::size_t>(std::llround(1001.0 * 16000 / 44100)));
}

TEST_CASE("resample: 1 kHz sine at 48 kHz keeps its peak at 1 kHz") {
  const auto out = resample(sine(1000, 48000, 48000), 16000);
  // Brute-force DFT of 2000 interior samples: 8 Hz bins, 1 kHz is bin 125.
  std::vector<std::complex<double>> seg(2000);
  for (std::size_t i = 0; i < seg.size(); ++i) seg[i] = out.samples[4000 + i];
  const auto spec = oracle::naive_dft(seg);
  std::size_t best = 1;
  for (std::size_t k = 1; k < 1000; ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  CHECK(std::abs(static_cast<long>(best) - 125) <= 1);
}

TEST_CASE("resample preserves the RMS of band-limited sinusoids") {
  struct Case { int from, to; double f; };
  for (auto c : {Case{48000, 16000, 3000}, Case{16000, 48000, 6000}, Case{44100, 16000, 6300},
                 Case{8000, 16000, 3100}, Case{22050, 16000, 500}}) {
    const auto in = sine(c.f, c.from, static_cast<std::size_t>(c.from));
    const auto out = resample(in, c.to);
    // Skip the filter edges.
    const double a = rms(in.samples, in.samples.size() / 10, in.samples.size() * 9 / 10);
    const double b = rms(out.samples, out.samples.size() / 10, out.samples.size() * 9 / 10);
    INFO(c.from, " -> ", c.to, " at ", c.f, " Hz");
    CHECK(std::abs(b / a - 1.0) < 0.01);
  }
}

TEST_CASE("fix_duration truncates, repeats cyclically and is idempotent") {
  AudioClip five;
  five.sample_rate = 16000;
  for (int i = 0; i < 80000; ++i) five.samples.push_back(static_cast<float>(i % 1000) / 1000.f);
  const auto cut = fix_duration(five);
  REQUIRE(cut.samples.size() == 64000);
  CHECK(std::equal(cut.samples.begin(), cut.samples.end(), five.samples.begin()));

  AudioClip exact = cut;
  CHECK(fix_duration(exact).samples == exact.samples);

  AudioClip one;
  one.sample_rate = 16000;
  CounterRng r(9);
  for (int i = 0; i < 16000; ++i) one.samples.push_back(static_cast<float>(r.uniform()));
  const auto looped = fix_duration(one);
  REQUIRE(looped.samples.size() == 64000);
  for (std::size_t i = 0; i < 64000; ++i) REQUIRE(looped.samples[i] == one.samples[i % 16000]);
  CHECK(fix_duration(looped).samples == looped.samples);

  AudioClip odd;
  odd.sample_rate = 16000;
  odd.samples.assign(12345, 0.1f);
  CHECK(fix_duration(fix_duration(odd, 2.5), 2.5).samples == fix_duration(odd, 2.5).samples);
  CHECK(fix_duration(odd, 2.5).samples.size() == 40000);
}

TEST_CASE("audio preconditions") {
  AudioClip empty;
  empty.sample_rate = 16000;
  CHECK(fails_with([&] { fix_duration(empty); }, Reason::empty_input));
  AudioClip norate;
  norate.samples = {0.1f};
  CHECK(fails_with([&] { fix_duration(norate); }, Reason::parameter));
  AudioClip nan_clip{{0.0f, std::nanf("")}, 16000};
  CHECK(fails_with([&] { validate(nan_clip); }, Reason::parameter));
  CHECK(fails_with([&] { resample(sine(1, 8000, 10), 0); }, Reason::parameter));
}
