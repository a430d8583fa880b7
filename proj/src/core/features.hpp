/* Copyright 2026 The lowres-tts Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "json.hpp"

namespace lrtts {

struct AudioConfig {
  int sample_rate = 16000;
  int n_fft = 1024;
  int win = 800;  // 50 ms
  int hop = 200;  // 12.5 ms
  int n_mels = 80;
  double fmin = 80.0;
  double fmax = 7600.0;
  double log_floor = 1e-5;
  // Per-corpus mel normalization; off by default, models train on raw log-mels.
  bool normalize = false;

  void Validate() const;
  int n_bins() const { return n_fft / 2 + 1; }
  double hop_seconds() const { return static_cast<double>(hop) / sample_rate; }
  nlohmann::json ToJson() const;
  static AudioConfig FromJson(const nlohmann::json& j);
  bool operator==(const AudioConfig&) const = default;
};

struct MelSpectrogram {
  Mat frames;  // T x n_mels, natural-log power
  double hop_s = 0.0125;

  Index num_frames() const { return frames.rows(); }
  Index num_mels() const { return frames.cols(); }
};

double HzToMel(double hz);  // HTK: 2595 log10(1 + f/700)
double MelToHz(double mel);

// n_mels x (n_fft/2 + 1) triangular filters, peak weight 1 at each centre.
Mat MelFilterbank(const AudioConfig& config);
std::vector<double> MelCenterFrequencies(const AudioConfig& config);

// T = 1 + floor((len - win) / hop); Hann-windowed frames zero-padded to n_fft.
Index NumFrames(Index num_samples, const AudioConfig& config);
Mat PowerSpectrogram(std::span<const double> samples, const AudioConfig& config);
MelSpectrogram ComputeMel(std::span<const double> samples, const AudioConfig& config);

// Phase retrieval from a log-mel spectrogram. The linear magnitude comes from
// the clamped pseudo-inverse of the filterbank.
std::vector<double> GriffinLim(const MelSpectrogram& mel, const AudioConfig& config, int n_iters = 60,
                               uint64_t seed = 0);
// Linear magnitude a log-mel spectrogram implies under the clamped pseudo-inverse.
Mat MelToLinearMagnitude(const MelSpectrogram& mel, const AudioConfig& config);
// || |STFT(x)| - target ||_F / ||target||_F over the first target.rows() frames.
double SpectralConvergence(std::span<const double> samples, const Mat& target_magnitude, const AudioConfig& config);

// Flat little-endian float32 T x n_mels at `path`, sidecar JSON at path + ".json".
void SaveMel(const std::string& path, const MelSpectrogram& mel);
MelSpectrogram LoadMel(const std::string& path);

}  // namespace lrtts
