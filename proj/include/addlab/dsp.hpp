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

#ifndef ADDLAB_DSP_HPP
#define ADDLAB_DSP_HPP

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "addlab/audio.hpp"

namespace addlab {

enum class DimKind { frequency_bin, cepstral_coef, cq_bin, embedding };

const char* dim_kind_name(DimKind kind) noexcept;

/// Named real-valued feature map. Frame-based features are (D, T) with
/// D = dims[0] feature rows and T = dims[1] frames, row-major.
struct FeatureTensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<float> data;
  double frame_rate = 0.0;
  DimKind dim_kind = DimKind::embedding;

  std::size_t dim() const { return dims.empty() ? 0 : dims[0]; }
  std::size_t frames() const { return dims.size() < 2 ? 0 : dims[1]; }
  float at(std::size_t d, std::size_t t) const { return data[d * frames() + t]; }
};

/// Throws Reason::format on inconsistent dims/data or non-finite entries.
void validate(const FeatureTensor& t);

/// Dense row-major matrix for filterbanks, transforms and frames.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
};

enum class WindowKind { hann };

struct FrameConfig {
  std::size_t win_len = 400;
  std::size_t hop_len = 160;
  std::size_t fft_size = 512;
  WindowKind window = WindowKind::hann;

  /// Window/hop from milliseconds; fft_size is the smallest power of two
  /// that holds the window.
  static FrameConfig from_ms(int sample_rate, double win_ms, double hop_ms);
  void validate() const;
  std::size_t frame_count(std::size_t num_samples) const;
};

/// Extractor parameters. Defaults follow common anti-spoofing setups.
struct FeatureParams {
  std::size_t n_mels = 80;
  std::size_t n_mfcc = 20;
  std::size_t n_lfcc_filters = 20;
  std::size_t n_lfcc = 20;
  double fmin = 0.0;
  double fmax = 8000.0;
  double cqt_fmin = 32.70;
  std::size_t cqt_bins_per_octave = 12;
  std::size_t cqt_bins = 84;
};

inline constexpr double kLogFloor = 1e-10;

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::span<std::complex<double>> x);
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x);

/// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
std::vector<double> hann_window(std::size_t n);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// (T x win_len) frames; frame t starts at sample t * hop, no padding.
Matrix frame_signal(const AudioClip& clip, const FrameConfig& cfg);

/// |X(k)|^2 of Hann-windowed, zero-padded frames: (fft/2+1, T).
FeatureTensor power_stft(const AudioClip& clip, const FrameConfig& cfg);

/// Triangular filters with centres equally spaced on the mel scale.
Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_size, double fs,
                      double fmin, double fmax);
/// Triangular filters with centres equally spaced in Hz.
Matrix linear_filterbank(std::size_t n_filters, std::size_t fft_size,
                         double fs, double fmin, double fmax);
/// Centre frequencies (Hz) of the filters built by the two functions above.
std::vector<double> mel_centers(std::size_t n_mels, double fmin, double fmax);
std::vector<double> linear_centers(std::size_t n_filters, double fmin,
                                   double fmax);

/// Orthonormal DCT-II matrix (n x n); row k is basis function k.
Matrix dct_matrix(std::size_t n);

FeatureTensor mel_spectrogram(const AudioClip& clip, const FrameConfig& cfg,
                              std::size_t n_mels = 80, double fmin = 0.0,
                              double fmax = 8000.0);
FeatureTensor mfcc(const AudioClip& clip, const FrameConfig& cfg,
                   std::size_t n_mels = 80, std::size_t n_coef = 20,
                   double fmin = 0.0, double fmax = 8000.0);
FeatureTensor log_spectrogram(const AudioClip& clip, const FrameConfig& cfg);
FeatureTensor lfcc(const AudioClip& clip, const FrameConfig& cfg,
                   std::size_t n_filters = 20, std::size_t n_coef = 20,
                   double fmin = 0.0, double fmax = 8000.0);

struct CqtParams {
  double fmin = 32.70;
  std::size_t bins_per_octave = 12;
  std::size_t n_bins = 84;
  std::size_t hop = 160;

  double quality() const;
  double center(std::size_t k) const;
  std::size_t window_length(std::size_t k, double fs) const;
};

/// Direct constant-Q transform: log(|<kernel_k, x>|^2 + eps) per hop, where
/// kernel_k is a Hann-windowed complex exponential at f_k of length
/// ceil(Q fs / f_k), normalised by its length and centred on t * hop.
FeatureTensor cqt(const AudioClip& clip, const CqtParams& params = {});

enum class FeatureKind { mel, mfcc, logspec, lfcc, cqt };

FeatureKind parse_feature_kind(const std::string& name);
const char* feature_kind_name(FeatureKind kind) noexcept;

/// Reusable extractor; filterbanks and transforms are built once and shared
/// read-only, so one instance may serve many threads.
class FeatureExtractor {
 public:
  FeatureExtractor(FeatureKind kind, int sample_rate, const FrameConfig& frame,
                   const FeatureParams& params);

  FeatureTensor operator()(const AudioClip& clip) const;

  FeatureKind kind() const { return kind_; }

 private:
  FeatureTensor cepstral(const AudioClip& clip, const Matrix& bank,
                         std::size_t n_coef, const char* name) const;
  FeatureTensor run_cqt(const AudioClip& clip) const;

  FeatureKind kind_;
  int sample_rate_;
  FrameConfig frame_;
  FeatureParams params_;
  Matrix bank_;
  Matrix dct_;
  CqtParams cqt_;
  std::vector<std::vector<std::complex<double>>> cqt_kernels_;
};

}  // namespace addlab

#endif  // ADDLAB_DSP_HPP
