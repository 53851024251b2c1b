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

#include "addlab/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "addlab/error.hpp"

namespace addlab {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void check_band(std::size_t n_filters, double fs, double fmin, double fmax) {
  if (n_filters < 2) parameter_error("filterbank needs at least 2 filters");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= fs / 2.0))
    parameter_error("invalid band [" + std::to_string(fmin) + ", " +
                    std::to_string(fmax) + "] for fs=" + std::to_string(fs));
}

// Triangles through consecutive points (Hz), evaluated at FFT bin centres.
Matrix triangular_bank(const std::vector<double>& points, std::size_t fft_size,
                       double fs) {
  const std::size_t n = points.size() - 2;
  const std::size_t bins = fft_size / 2 + 1;
  Matrix bank(n, bins);
  for (std::size_t m = 0; m < n; ++m) {
    const double lo = points[m], mid = points[m + 1], hi = points[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * fs / fft_size;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      bank(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return bank;
}

std::vector<double> mel_points(std::size_t n, double fmin, double fmax) {
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  std::vector<double> pts(n + 2);
  for (std::size_t i = 0; i < n + 2; ++i)
    pts[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (n + 1));
  return pts;
}

std::vector<double> linear_points(std::size_t n, double fmin, double fmax) {
  std::vector<double> pts(n + 2);
  for (std::size_t i = 0; i < n + 2; ++i)
    pts[i] = fmin + (fmax - fmin) * static_cast<double>(i) / (n + 1);
  return pts;
}

// Power spectrum as (bins x T).
Matrix power_matrix(const AudioClip& clip, const FrameConfig& cfg) {
  const Matrix frames = frame_signal(clip, cfg);
  const std::vector<double> window = hann_window(cfg.win_len);
  const std::size_t bins = cfg.fft_size / 2 + 1;
  Matrix power(bins, frames.rows);
  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (std::size_t t = 0; t < frames.rows; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (std::size_t n = 0; n < cfg.win_len; ++n)
      buf[n] = frames(t, n) * window[n];
    fft_inplace(buf);
    for (std::size_t k = 0; k < bins; ++k) power(k, t) = std::norm(buf[k]);
  }
  return power;
}

FeatureTensor to_feature(const Matrix& m, std::string name, double frame_rate,
                         DimKind kind) {
  FeatureTensor out;
  out.name = std::move(name);
  out.dims = {m.rows, m.cols};
  out.data.resize(m.data.size());
  std::transform(m.data.begin(), m.data.end(), out.data.begin(),
                 [](double v) { return static_cast<float>(v); });
  out.frame_rate = frame_rate;
  out.dim_kind = kind;
  return out;
}

Matrix apply_bank_log(const Matrix& bank, const Matrix& power) {
  Matrix out(bank.rows, power.cols);
  for (std::size_t m = 0; m < bank.rows; ++m) {
    for (std::size_t k = 0; k < bank.cols; ++k) {
      const double w = bank(m, k);
      if (w == 0.0) continue;
      const double* src = &power.data[k * power.cols];
      double* dst = &out.data[m * out.cols];
      for (std::size_t t = 0; t < power.cols; ++t) dst[t] += w * src[t];
    }
  }
  for (double& v : out.data) v = std::log(v + kLogFloor);
  return out;
}

}  // namespace

const char* dim_kind_name(DimKind kind) noexcept {
  switch (kind) {
    case DimKind::frequency_bin: return "frequency-bin";
    case DimKind::cepstral_coef: return "cepstral-coef";
    case DimKind::cq_bin: return "cq-bin";
    case DimKind::embedding: return "embedding";
  }
  return "embedding";
}

void validate(const FeatureTensor& t) {
  if (t.dims.empty()) fail(Status::data, Reason::format, "feature has no dims");
  std::size_t n = 1;
  for (auto d : t.dims) n *= d;
  if (n != t.data.size())
    fail(Status::data, Reason::format,
         "feature '" + t.name + "' dims do not match data length");
  for (float v : t.data)
    if (!std::isfinite(v))
      fail(Status::data, Reason::format,
           "feature '" + t.name + "' has non-finite entries");
}

FrameConfig FrameConfig::from_ms(int sample_rate, double win_ms,
                                 double hop_ms) {
  FrameConfig cfg;
  cfg.win_len = static_cast<std::size_t>(std::lround(win_ms * sample_rate / 1000.0));
  cfg.hop_len = static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
  cfg.fft_size = 1;
  while (cfg.fft_size < cfg.win_len) cfg.fft_size <<= 1;
  cfg.validate();
  return cfg;
}

void FrameConfig::validate() const {
  if (win_len == 0 || win_len > fft_size)
    parameter_error("need 0 < win_len <= fft_size");
  if (hop_len == 0 || hop_len > win_len)
    parameter_error("need 0 < hop_len <= win_len");
  if (!is_pow2(fft_size)) parameter_error("fft_size must be a power of two");
}

std::size_t FrameConfig::frame_count(std::size_t num_samples) const {
  if (num_samples < win_len) return 0;
  return 1 + (num_samples - win_len) / hop_len;
}

void fft_inplace(std::span<std::complex<double>> x) {
  const std::size_t n = x.size();
  if (!is_pow2(n)) parameter_error("FFT size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles computed directly rather than by recurrence, which drifts.
        const std::complex<double> w(std::cos(ang * k), std::sin(ang * k));
        const auto u = x[i + k];
        const auto v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x) {
  std::vector<std::complex<double>> out(x.begin(), x.end());
  fft_inplace(out);
  return out;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / n);
  return w;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Matrix frame_signal(const AudioClip& clip, const FrameConfig& cfg) {
  cfg.validate();
  const std::size_t n = clip.samples.size();
  if (n < cfg.win_len)
    fail(Status::data, Reason::too_short,
         "clip of " + std::to_string(n) + " samples is shorter than one window (" +
             std::to_string(cfg.win_len) + ")");
  const std::size_t frames = cfg.frame_count(n);
  Matrix out(frames, cfg.win_len);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t i = 0; i < cfg.win_len; ++i)
      out(t, i) = clip.samples[t * cfg.hop_len + i];
  return out;
}

FeatureTensor power_stft(const AudioClip& clip, const FrameConfig& cfg) {
  validate(clip);
  return to_feature(power_matrix(clip, cfg), "stft_power",
                    static_cast<double>(clip.sample_rate) / cfg.hop_len,
                    DimKind::frequency_bin);
}

Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_size, double fs,
                      double fmin, double fmax) {
  check_band(n_mels, fs, fmin, fmax);
  return triangular_bank(mel_points(n_mels, fmin, fmax), fft_size, fs);
}

Matrix linear_filterbank(std::size_t n_filters, std::size_t fft_size,
                         double fs, double fmin, double fmax) {
  check_band(n_filters, fs, fmin, fmax);
  return triangular_bank(linear_points(n_filters, fmin, fmax), fft_size, fs);
}

std::vector<double> mel_centers(std::size_t n_mels, double fmin, double fmax) {
  auto pts = mel_points(n_mels, fmin, fmax);
  return {pts.begin() + 1, pts.end() - 1};
}

std::vector<double> linear_centers(std::size_t n_filters, double fmin,
                                   double fmax) {
  auto pts = linear_points(n_filters, fmin, fmax);
  return {pts.begin() + 1, pts.end() - 1};
}

Matrix dct_matrix(std::size_t n) {
  Matrix d(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (std::size_t i = 0; i < n; ++i)
      d(k, i) = scale * std::cos(kPi * k * (2.0 * i + 1.0) / (2.0 * n));
  }
  return d;
}

FeatureTensor mel_spectrogram(const AudioClip& clip, const FrameConfig& cfg,
                              std::size_t n_mels, double fmin, double fmax) {
  FeatureParams p;
  p.n_mels = n_mels;
  p.fmin = fmin;
  p.fmax = fmax;
  return FeatureExtractor(FeatureKind::mel, clip.sample_rate, cfg, p)(clip);
}

FeatureTensor mfcc(const AudioClip& clip, const FrameConfig& cfg,
                   std::size_t n_mels, std::size_t n_coef, double fmin,
                   double fmax) {
  FeatureParams p;
  p.n_mels = n_mels;
  p.n_mfcc = n_coef;
  p.fmin = fmin;
  p.fmax = fmax;
  return FeatureExtractor(FeatureKind::mfcc, clip.sample_rate, cfg, p)(clip);
}

FeatureTensor log_spectrogram(const AudioClip& clip, const FrameConfig& cfg) {
  return FeatureExtractor(FeatureKind::logspec, clip.sample_rate, cfg, {})(clip);
}

FeatureTensor lfcc(const AudioClip& clip, const FrameConfig& cfg,
                   std::size_t n_filters, std::size_t n_coef, double fmin,
                   double fmax) {
  FeatureParams p;
  p.n_lfcc_filters = n_filters;
  p.n_lfcc = n_coef;
  p.fmin = fmin;
  p.fmax = fmax;
  return FeatureExtractor(FeatureKind::lfcc, clip.sample_rate, cfg, p)(clip);
}

double CqtParams::quality() const {
  return 1.0 / (std::pow(2.0, 1.0 / static_cast<double>(bins_per_octave)) - 1.0);
}

double CqtParams::center(std::size_t k) const {
  return fmin * std::pow(2.0, static_cast<double>(k) / bins_per_octave);
}

std::size_t CqtParams::window_length(std::size_t k, double fs) const {
  return static_cast<std::size_t>(std::ceil(quality() * fs / center(k)));
}

FeatureTensor cqt(const AudioClip& clip, const CqtParams& params) {
  FeatureParams p;
  p.cqt_fmin = params.fmin;
  p.cqt_bins_per_octave = params.bins_per_octave;
  p.cqt_bins = params.n_bins;
  FrameConfig frame;
  frame.hop_len = params.hop;
  frame.win_len = std::max<std::size_t>(params.hop, frame.win_len);
  while (frame.fft_size < frame.win_len) frame.fft_size <<= 1;
  return FeatureExtractor(FeatureKind::cqt, clip.sample_rate, frame, p)(clip);
}

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "mel") return FeatureKind::mel;
  if (name == "mfcc") return FeatureKind::mfcc;
  if (name == "logspec") return FeatureKind::logspec;
  if (name == "lfcc") return FeatureKind::lfcc;
  if (name == "cqt") return FeatureKind::cqt;
  fail(Status::usage, Reason::parameter, "unknown feature '" + name +
                                             "' (expected mel|mfcc|logspec|lfcc|cqt)");
}

const char* feature_kind_name(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::mel: return "mel";
    case FeatureKind::mfcc: return "mfcc";
    case FeatureKind::logspec: return "logspec";
    case FeatureKind::lfcc: return "lfcc";
    case FeatureKind::cqt: return "cqt";
  }
  return "mel";
}

FeatureExtractor::FeatureExtractor(FeatureKind kind, int sample_rate,
                                   const FrameConfig& frame,
                                   const FeatureParams& params)
    : kind_(kind), sample_rate_(sample_rate), frame_(frame), params_(params) {
  if (sample_rate <= 0) parameter_error("sample rate must be positive");
  frame_.validate();
  const double fs = sample_rate;
  switch (kind) {
    case FeatureKind::mel:
      bank_ = mel_filterbank(params.n_mels, frame.fft_size, fs, params.fmin,
                             params.fmax);
      break;
    case FeatureKind::mfcc:
      if (params.n_mfcc > params.n_mels)
        parameter_error("n_coef (" + std::to_string(params.n_mfcc) +
                        ") exceeds n_mels (" + std::to_string(params.n_mels) + ")");
      bank_ = mel_filterbank(params.n_mels, frame.fft_size, fs, params.fmin,
                             params.fmax);
      dct_ = dct_matrix(params.n_mels);
      break;
    case FeatureKind::lfcc:
      if (params.n_lfcc > params.n_lfcc_filters)
        parameter_error("n_coef (" + std::to_string(params.n_lfcc) +
                        ") exceeds n_filters (" +
                        std::to_string(params.n_lfcc_filters) + ")");
      bank_ = linear_filterbank(params.n_lfcc_filters, frame.fft_size, fs,
                                params.fmin, params.fmax);
      dct_ = dct_matrix(params.n_lfcc_filters);
      break;
    case FeatureKind::logspec:
      break;
    case FeatureKind::cqt: {
      cqt_.fmin = params.cqt_fmin;
      cqt_.bins_per_octave = params.cqt_bins_per_octave;
      cqt_.n_bins = params.cqt_bins;
      cqt_.hop = frame.hop_len;
      if (cqt_.bins_per_octave == 0 || cqt_.n_bins == 0 || !(cqt_.fmin > 0.0))
        parameter_error("CQT needs fmin > 0 and positive bin counts");
      const double top = cqt_.fmin * std::pow(2.0, static_cast<double>(cqt_.n_bins) /
                                                       cqt_.bins_per_octave);
      if (top > fs / 2.0)
        parameter_error("CQT top frequency " + std::to_string(top) +
                        " Hz exceeds Nyquist " + std::to_string(fs / 2.0));
      cqt_kernels_.resize(cqt_.n_bins);
      for (std::size_t k = 0; k < cqt_.n_bins; ++k) {
        const std::size_t len = cqt_.window_length(k, fs);
        const auto window = hann_window(len);
        const double fk = cqt_.center(k);
        auto& kern = cqt_kernels_[k];
        kern.resize(len);
        for (std::size_t n = 0; n < len; ++n) {
          const double ph = -2.0 * kPi * fk * static_cast<double>(n) / fs;
          kern[n] = window[n] / static_cast<double>(len) *
                    std::complex<double>(std::cos(ph), std::sin(ph));
        }
      }
      break;
    }
  }
}

FeatureTensor FeatureExtractor::operator()(const AudioClip& clip) const {
  validate(clip);
  if (clip.sample_rate != sample_rate_)
    parameter_error("extractor built for " + std::to_string(sample_rate_) +
                    " Hz, clip is " + std::to_string(clip.sample_rate) + " Hz");
  const double frame_rate = static_cast<double>(sample_rate_) / frame_.hop_len;
  switch (kind_) {
    case FeatureKind::mel:
      return to_feature(apply_bank_log(bank_, power_matrix(clip, frame_)), "mel",
                        frame_rate, DimKind::frequency_bin);
    case FeatureKind::mfcc:
      return cepstral(clip, bank_, params_.n_mfcc, "mfcc");
    case FeatureKind::lfcc:
      return cepstral(clip, bank_, params_.n_lfcc, "lfcc");
    case FeatureKind::logspec: {
      Matrix p = power_matrix(clip, frame_);
      for (double& v : p.data) v = std::log(v + kLogFloor);
      return to_feature(p, "logspec", frame_rate, DimKind::frequency_bin);
    }
    case FeatureKind::cqt:
      return run_cqt(clip);
  }
  return {};
}

FeatureTensor FeatureExtractor::cepstral(const AudioClip& clip,
                                         const Matrix& bank, std::size_t n_coef,
                                         const char* name) const {
  const Matrix logbank = apply_bank_log(bank, power_matrix(clip, frame_));
  Matrix out(n_coef, logbank.cols);
  for (std::size_t c = 0; c < n_coef; ++c)
    for (std::size_t m = 0; m < logbank.rows; ++m) {
      const double w = dct_(c, m);
      for (std::size_t t = 0; t < logbank.cols; ++t)
        out(c, t) += w * logbank(m, t);
    }
  return to_feature(out, name, static_cast<double>(sample_rate_) / frame_.hop_len,
                    DimKind::cepstral_coef);
}

FeatureTensor FeatureExtractor::run_cqt(const AudioClip& clip) const {
  const std::size_t n = clip.samples.size();
  if (n == 0) fail(Status::data, Reason::empty_input, "cqt: empty clip");
  const std::size_t frames = 1 + (n - 1) / cqt_.hop;
  Matrix out(cqt_.n_bins, frames);
  const auto len_signed = static_cast<std::ptrdiff_t>(n);
  for (std::size_t k = 0; k < cqt_.n_bins; ++k) {
    const auto& kern = cqt_kernels_[k];
    const auto klen = static_cast<std::ptrdiff_t>(kern.size());
    for (std::size_t t = 0; t < frames; ++t) {
      const std::ptrdiff_t start =
          static_cast<std::ptrdiff_t>(t * cqt_.hop) - klen / 2;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -start);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(klen, len_signed - start);
      double re = 0.0, im = 0.0;
      for (std::ptrdiff_t i = lo; i < hi; ++i) {
        const double x = clip.samples[start + i];
        re += kern[i].real() * x;
        im += kern[i].imag() * x;
      }
      out(k, t) = std::log(re * re + im * im + kLogFloor);
    }
  }
  return to_feature(out, "cqt", static_cast<double>(sample_rate_) / cqt_.hop,
                    DimKind::cq_bin);
}

}  // namespace addlab
