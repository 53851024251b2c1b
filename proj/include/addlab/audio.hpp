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

#ifndef ADDLAB_AUDIO_HPP
#define ADDLAB_AUDIO_HPP

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace addlab {

/// Mono waveform. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

/// Throws Reason::parameter unless the clip has a positive rate and finite
/// samples.
void validate(const AudioClip& clip);

/// Decodes a RIFF/WAVE container holding PCM16 or float32 samples in one or
/// two channels. Stereo is averaged to mono; PCM16 is scaled by 1/32768.
AudioClip decode_wav(std::span<const std::byte> bytes);
AudioClip read_wav(const std::filesystem::path& path);

/// Encoders, used by tests and fixtures. PCM16 rounds to nearest and clips.
std::vector<std::byte> encode_wav_pcm16(const AudioClip& clip);
std::vector<std::byte> encode_wav_float32(const AudioClip& clip);
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

/// Band-limited polyphase resampler: Kaiser-windowed sinc, beta 8.6, 32 taps
/// per phase at the lower of the two rates. Output length is
/// round(len * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

/// Truncates (keeping the head) or cyclically repeats the clip to exactly
/// round(seconds * sample_rate) samples.
AudioClip fix_duration(const AudioClip& clip, double seconds = 4.0);

}  // namespace addlab

#endif  // ADDLAB_AUDIO_HPP
