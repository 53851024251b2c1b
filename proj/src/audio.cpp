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

#include "addlab/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "addlab/error.hpp"

namespace addlab {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

[[noreturn]] void decode_error(const std::string& chunk,
                               const std::string& what) {
  fail(Status::data, Reason::decode,
       "wav decode error in '" + chunk + "' chunk: " + what);
}

[[noreturn]] void unsupported(const std::string& what) {
  fail(Status::data, Reason::unsupported_format,
       "unsupported wav encoding: " + what);
}

std::uint16_t read_u16(const std::byte* p) {
  return static_cast<std::uint16_t>(std::to_integer<unsigned>(p[0]) |
                                    (std::to_integer<unsigned>(p[1]) << 8));
}

std::uint32_t read_u32(const std::byte* p) {
  return static_cast<std::uint32_t>(std::to_integer<unsigned>(p[0])) |
         (static_cast<std::uint32_t>(std::to_integer<unsigned>(p[1])) << 8) |
         (static_cast<std::uint32_t>(std::to_integer<unsigned>(p[2])) << 16) |
         (static_cast<std::uint32_t>(std::to_integer<unsigned>(p[3])) << 24);
}

bool tag_is(const std::byte* p, const char* tag) {
  return std::memcmp(p, tag, 4) == 0;
}

void put_u16(std::vector<std::byte>& out, std::uint16_t v) {
  out.push_back(static_cast<std::byte>(v & 0xFF));
  out.push_back(static_cast<std::byte>(v >> 8));
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::byte>& out, const char* tag) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>(tag[i]));
}

std::vector<std::byte> encode(const AudioClip& clip, std::uint16_t format) {
  validate(clip);
  const std::uint16_t bits = format == kFormatPcm ? 16 : 32;
  const std::uint32_t block = bits / 8;
  const auto data_bytes =
      static_cast<std::uint32_t>(clip.samples.size() * block);
  std::vector<std::byte> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : clip.samples) {
    if (format == kFormatPcm) {
      const long q = std::lround(static_cast<double>(s) * 32768.0);
      const auto v = static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      std::uint32_t bitsv;
      std::memcpy(&bitsv, &s, 4);
      put_u32(out, bitsv);
    }
  }
  return out;
}

// Modified Bessel function of the first kind, order zero.
double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

constexpr double kKaiserBeta = 8.6;
constexpr int kTapsPerPhase = 32;

}  // namespace

void validate(const AudioClip& clip) {
  if (clip.sample_rate <= 0)
    parameter_error("sample_rate must be positive, got " +
                    std::to_string(clip.sample_rate));
  for (float s : clip.samples)
    if (!std::isfinite(s)) parameter_error("audio clip has non-finite samples");
}

AudioClip decode_wav(std::span<const std::byte> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes.data(), "RIFF"))
    decode_error("RIFF", "missing RIFF header");
  if (!tag_is(bytes.data() + 8, "WAVE"))
    decode_error("RIFF", "form type is not WAVE");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  const std::byte* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::byte* hdr = bytes.data() + pos;
    const std::string tag(reinterpret_cast<const char*>(hdr), 4);
    const std::uint32_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      // Tolerate a data chunk whose declared size overruns the file (common
      // with streamed writers) by clamping; anything else is malformed.
      if (tag != "data") decode_error(tag, "chunk size exceeds file length");
    }
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (tag == "fmt ") {
      if (avail < 16) decode_error("fmt ", "chunk shorter than 16 bytes");
      const std::byte* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      block_align = read_u16(f + 12);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (avail < 40) decode_error("fmt ", "truncated WAVE_FORMAT_EXTENSIBLE");
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (tag == "data") {
      data = bytes.data() + body;
      data_size = avail;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) decode_error("fmt ", "chunk missing before data");
  if (data == nullptr) decode_error("data", "chunk missing");
  if (channels != 1 && channels != 2)
    unsupported(std::to_string(channels) + " channels");
  if (rate == 0) decode_error("fmt ", "sample rate is zero");
  if (format == kFormatPcm) {
    if (bits != 16) unsupported("PCM with " + std::to_string(bits) + " bits");
  } else if (format == kFormatFloat) {
    if (bits != 32) unsupported("float with " + std::to_string(bits) + " bits");
  } else {
    unsupported("format code " + std::to_string(format));
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
  if (block_align != frame_bytes)
    decode_error("fmt ", "block_align " + std::to_string(block_align) +
                             " inconsistent with channels/bits");

  const std::size_t frames = data_size / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::byte* p = data + i * frame_bytes + c * (bits / 8);
      if (format == kFormatPcm) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        const std::uint32_t u = read_u32(p);
        float f;
        std::memcpy(&f, &u, 4);
        if (!std::isfinite(f)) decode_error("data", "non-finite float sample");
        acc += f;
      }
    }
    clip.samples[i] = static_cast<float>(acc / channels);
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(Status::runtime, Reason::io, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  try {
    return decode_wav(std::as_bytes(std::span<const char>(raw)));
  } catch (const Error& e) {
    throw Error(e.status(), e.reason(), path.string() + ": " + e.what());
  }
}

std::vector<std::byte> encode_wav_pcm16(const AudioClip& clip) {
  return encode(clip, kFormatPcm);
}

std::vector<std::byte> encode_wav_float32(const AudioClip& clip) {
  return encode(clip, kFormatFloat);
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  const auto bytes = encode_wav_pcm16(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Status::runtime, Reason::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Status::runtime, Reason::io, "write failed: " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  validate(clip);
  if (target_rate <= 0)
    parameter_error("target_rate must be positive, got " +
                    std::to_string(target_rate));
  if (target_rate == clip.sample_rate) return clip;

  const std::int64_t g = std::gcd(clip.sample_rate, target_rate);
  const std::int64_t up = target_rate / g;          // L
  const std::int64_t down = clip.sample_rate / g;   // M
  const auto in_len = static_cast<std::int64_t>(clip.samples.size());
  const std::int64_t out_len =
      (in_len * target_rate + clip.sample_rate / 2) / clip.sample_rate;

  // Filter in units of input samples; cutoff is the lower Nyquist.
  const double cutoff = std::min(1.0, static_cast<double>(up) / down);
  const double stretch = std::max(1.0, static_cast<double>(down) / up);
  const int half = static_cast<int>(std::ceil(kTapsPerPhase / 2 * stretch));
  const int taps = 2 * half;
  const double i0_beta = bessel_i0(kKaiserBeta);

  auto make_phase = [&](std::int64_t phase, double* h) {
    const double frac = static_cast<double>(phase) / up;
    double sum = 0.0;
    for (int j = 0; j < taps; ++j) {
      const double x = (j - half + 1) - frac;
      const double u = x / half;
      double w = 0.0;
      if (std::abs(u) < 1.0)
        w = bessel_i0(kKaiserBeta * std::sqrt(1.0 - u * u)) / i0_beta;
      const double arg = cutoff * x;
      const double sinc =
          arg == 0.0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
      h[j] = cutoff * sinc * w;
      sum += h[j];
    }
    for (int j = 0; j < taps; ++j) h[j] /= sum;
  };

  constexpr std::int64_t kMaxTable = 4096;
  std::vector<double> table;
  if (up <= kMaxTable) {
    table.resize(static_cast<std::size_t>(up * taps));
    for (std::int64_t p = 0; p < up; ++p) make_phase(p, &table[p * taps]);
  }
  std::vector<double> scratch(taps);

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (std::int64_t n = 0; n < out_len; ++n) {
    const std::int64_t num = n * down;
    const std::int64_t base = num / up;
    const std::int64_t phase = num % up;
    const double* h;
    if (!table.empty()) {
      h = &table[phase * taps];
    } else {
      make_phase(phase, scratch.data());
      h = scratch.data();
    }
    double acc = 0.0;
    for (int j = 0; j < taps; ++j) {
      const std::int64_t idx = base + j - half + 1;
      if (idx >= 0 && idx < in_len) acc += h[j] * clip.samples[idx];
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

AudioClip fix_duration(const AudioClip& clip, double seconds) {
  validate(clip);
  if (!(seconds > 0.0))
    parameter_error("duration must be positive");
  if (clip.samples.empty())
    fail(Status::data, Reason::empty_input, "fix_duration: empty clip");
  const auto target =
      static_cast<std::size_t>(std::llround(seconds * clip.sample_rate));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(target);
  const std::size_t n = clip.samples.size();
  if (n >= target) {
    std::copy_n(clip.samples.begin(), target, out.samples.begin());
  } else {
    for (std::size_t i = 0; i < target; ++i) out.samples[i] = clip.samples[i % n];
  }
  return out;
}

}  // namespace addlab
