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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "features.hpp"
#include "frontend.hpp"
#include "json.hpp"
#include "optimizer.hpp"

namespace lrtts {

// Desk-scale Tacotron2-style network: embedding -> conv stack -> BiLSTM
// encoder, location-sensitive attention, prenet + two LSTM decoder cells,
// linear mel/stop heads and a residual convolutional postnet. One frame per
// decoder step.
struct AMConfig {
  int vocab_size = 0;
  int embed_dim = 64;
  int encoder_dim = 64;
  int decoder_dim = 128;
  int attention_dim = 64;
  int location_filters = 8;
  int location_kernel = 15;
  std::vector<int> prenet_dims = {64, 64};
  int encoder_conv_layers = 3;
  int encoder_kernel = 5;
  int postnet_layers = 3;
  int postnet_channels = 64;
  int postnet_kernel = 5;
  int n_mels = 80;
  int max_decoder_steps = 0;  // 0: max_decoder_ratio x input token count
  double max_decoder_ratio = 10.0;
  double stop_threshold = 0.5;
  double teacher_forcing_ratio = 1.0;
  double prenet_dropout = 0.5;  // training only; inference is deterministic
  // Diagonal attention prior added to the training loss (0 disables).
  double guided_attention_weight = 1.0;
  double guided_attention_width = 0.2;

  void Validate() const;
  int MaxDecoderSteps(size_t num_tokens) const;
  nlohmann::json ToJson() const;
  static AMConfig FromJson(const nlohmann::json& j);
  bool operator==(const AMConfig&) const = default;
};

using ShapeMap = std::map<std::string, std::pair<Index, Index>>;

ShapeMap AcousticParamShapes(const AMConfig& config);

struct AMLoss {
  double mel_pre = 0.0;
  double mel_post = 0.0;
  double stop = 0.0;
  double attention = 0.0;  // guided-attention penalty, already weighted
  double total() const { return mel_pre + mel_post + stop + attention; }
};

struct AMExample {
  std::vector<int> ids;
  Mat mel;  // T x n_mels target
};

struct DecoderState {
  Mat att_h, att_c;
  Mat dec_h, dec_c;
  Mat context;    // 1 x encoder_dim
  Mat alignment;  // 1 x L
};

struct EncodedInput {
  Mat memory;  // L x encoder_dim
  Mat keys;    // L x attention_dim
};

struct DecodeStepOutput {
  Mat frame;  // 1 x n_mels
  double stop_logit = 0.0;
  DecoderState state;
  Mat alignment;
};

struct SynthesisResult {
  MelSpectrogram mel;  // post-net output
  Mat mel_pre;
  std::vector<double> stop_logits;
  Mat alignments;  // decoder_steps x L
  bool stopped_naturally = false;
};

class AcousticModel {
 public:
  AcousticModel(AMConfig config, ParamMap params);
  static AcousticModel Initialize(const AMConfig& config, uint64_t seed);

  const AMConfig& config() const { return config_; }
  const ParamMap& params() const { return params_; }
  ParamMap& mutable_params() { return params_; }

  Mat Encode(const std::vector<int>& ids) const;
  EncodedInput Prepare(const std::vector<int>& ids) const;
  // Location-sensitive attention for one query; returns (context, alignment).
  std::pair<Mat, Mat> AttentionStep(const Mat& query, const Mat& memory, const Mat& prev_alignment) const;
  DecoderState InitialState(const EncodedInput& enc) const;
  DecodeStepOutput DecodeStep(const Mat& prev_frame, const DecoderState& state, const EncodedInput& enc) const;

  // Free-running decoding until sigmoid(stop) > stop_threshold or the step cap.
  SynthesisResult Synthesize(const std::vector<int>& ids) const;
  // Decoder fed ground-truth previous frames; same frame count as gt_mel.
  SynthesisResult TeacherForced(const std::vector<int>& ids, const Mat& gt_mel) const;
  MelSpectrogram TeacherForcedPredict(const std::vector<int>& ids, const MelSpectrogram& gt_mel) const;

  // Masked loss over a padded batch. Gradients are filled when `grads` is set.
  // `rng` drives prenet dropout and scheduled sampling; without it the loss
  // is the deterministic inference-mode value.
  AMLoss Loss(const std::vector<AMExample>& batch, ParamMap* grads = nullptr, Rng* rng = nullptr) const;
  AMLoss TrainStep(const std::vector<AMExample>& batch, Adam& optimizer, Rng* rng = nullptr);

 private:
  AMConfig config_;
  ParamMap params_;
};

// Stop target is 1 on the final frame only.
Mat StopTargets(Index frames);

}  // namespace lrtts
