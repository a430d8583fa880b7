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

#include <vector>

#include "features.hpp"
#include "json.hpp"
#include "mol.hpp"
#include "optimizer.hpp"

namespace lrtts {

// Conditional WaveNet with a discretized mixture-of-logistics head.
struct VocoderConfig {
  int layers = 24;
  int kernel = 2;
  std::vector<int> dilations = DefaultDilations(24, 3);
  int residual_channels = 32;
  int gate_channels = 64;  // pre-activation width; tanh and sigmoid halves
  int skip_channels = 64;
  int conditioning_channels = 80;
  int n_mixtures = 10;
  int sample_rate = 16000;
  int hop = 200;

  // `cycles` repetitions of 1, 2, 4, ... spanning `layers` layers.
  static std::vector<int> DefaultDilations(int layers, int cycles);
  void Validate() const;
  int output_channels() const { return 3 * n_mixtures; }
  nlohmann::json ToJson() const;
  static VocoderConfig FromJson(const nlohmann::json& j);
  bool operator==(const VocoderConfig&) const = default;
};

// 1 + (kernel - 1) * sum(dilations).
int ReceptiveField(const VocoderConfig& config);

// Per-sample conditioning held at frame rate: sample k reads frames[k / hop].
struct ConditioningTrack {
  Mat frames;  // T x channels
  int hop = 200;
  Index size() const { return frames.rows() * hop; }
  Index channels() const { return frames.cols(); }
  auto row(Index k) const { return frames.row(k / hop); }
};

ConditioningTrack UpsampleConditioning(const MelSpectrogram& mel, int hop);
// Explicit N x channels expansion of a track.
Mat ExpandTrack(const ConditioningTrack& track);

std::map<std::string, std::pair<Index, Index>> VocoderParamShapes(const VocoderConfig& config);

struct VocoderExample {
  std::vector<double> audio;  // dequantized 16-bit samples, length == cond.size()
  ConditioningTrack cond;
};

struct GenerateOptions {
  bool deterministic = false;  // mean of the heaviest component instead of sampling
  bool record_params = false;
};

struct GenerateResult {
  std::vector<double> audio;   // dequantized codes
  std::vector<int16_t> codes;  // the same samples as 16-bit PCM
  Mat params;                  // N x 3K when recorded
};

class Vocoder {
 public:
  Vocoder(VocoderConfig config, ParamMap params);
  static Vocoder Initialize(const VocoderConfig& config, uint64_t seed);

  const VocoderConfig& config() const { return config_; }
  const ParamMap& params() const { return params_; }
  ParamMap& mutable_params() { return params_; }

  // Row t of the result (N x 3K: logits, means, log-scales) depends on
  // audio_in[t - RF + 1 .. t] and cond[t] and gives the distribution of the
  // sample after audio_in[t]. Left edge zero-padded.
  Mat ForwardParallel(const std::vector<double>& audio_in, const ConditioningTrack& cond) const;

  // Arithmetic used by Nll/TrainStep. ForwardParallel and generation always
  // run in double.
  enum class Precision { kFloat32, kFloat64 };
  void set_precision(Precision p) { precision_ = p; }
  Precision precision() const { return precision_; }

  // Mean NLL per sample of each example's audio, teacher-forced with the
  // previous sample (zero before the first). Fills gradients when asked.
  double Nll(const std::vector<VocoderExample>& batch, ParamMap* grads = nullptr) const;
  double TrainStep(const std::vector<VocoderExample>& batch, Adam& optimizer);

  // Autoregressive generation with per-layer circular buffers.
  GenerateResult GenerateIncremental(const ConditioningTrack& cond, Rng& rng, const GenerateOptions& options = {}) const;

 private:
  VocoderConfig config_;
  ParamMap params_;
  Precision precision_ = Precision::kFloat32;
};

// Input to ForwardParallel that predicts `audio`: [0, audio[0..N-2]].
std::vector<double> ShiftRight(const std::vector<double>& audio);

// Snaps samples onto the 16-bit grid (quantize, dequantize).
std::vector<double> SnapTo16Bit(const std::vector<double>& samples);

}  // namespace lrtts
