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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "acoustic_model.hpp"
#include "checkpoint.hpp"
#include "features.hpp"
#include "frontend.hpp"
#include "vocoder.hpp"

namespace lrtts {

// Concatenation in argument order; duplicate ids are an error naming the id.
Manifest MergeCorpora(const std::vector<Manifest>& manifests);

enum class Stage { kAverage, kFinetune };

struct TrainPlan {
  Stage stage = Stage::kAverage;
  std::vector<std::string> corpora;  // manifest paths
  int steps = 1000;
  double learning_rate = 1e-3;
  // > 0: exponential decay from learning_rate to this value over the run.
  double final_learning_rate = 0.0;
  uint64_t seed = 0;
  std::optional<std::string> init_from;
  int batch_size = 10;
  // Average stage only: shdia utterances are left out unless this is set.
  bool include_shdia = false;
  // Vocoder only: random crop length per example, 0 = whole utterance.
  int segment_samples = 4000;

  void Validate() const;
  nlohmann::json ToJson() const;
  static TrainPlan FromJson(const nlohmann::json& j);
  static TrainPlan Load(const std::string& path);
  // Stage defaults: 1e-3 for the average stage, 1e-4 for fine-tuning.
  static double DefaultLearningRate(Stage stage) { return stage == Stage::kAverage ? 1e-3 : 1e-4; }
};

// Learning rate for optimizer step `step` of the plan.
double ScheduledLearningRate(const TrainPlan& plan, int step);

// Acoustic model plus everything needed to turn text into its input.
struct AcousticBundle {
  AcousticModel model;
  Vocabulary vocab;
  FrontendOptions frontend;
  AudioConfig audio;
  nlohmann::json meta;
};

struct VocoderBundle {
  Vocoder model;
  AudioConfig audio;
  nlohmann::json meta;
};

void SaveAcoustic(const std::string& path, const AcousticBundle& bundle);
AcousticBundle LoadAcoustic(const std::string& path);
void SaveVocoder(const std::string& path, const VocoderBundle& bundle);
VocoderBundle LoadVocoder(const std::string& path);

// Mel frames between model space and log-mel space; identity unless the
// bundle was trained with mel normalization.
Mat DenormalizedMel(const AcousticBundle& am, const Mat& model_space);
Mat NormalizedMel(const AcousticBundle& am, const Mat& log_mel);

// Progress callback: (step, loss).
using StepCallback = std::function<void(int, double)>;

// Examples for an acoustic model: token ids and the log-mel of each wav.
std::vector<AMExample> MakeAcousticExamples(const Manifest& manifest, const Vocabulary& vocab,
                                            const FrontendOptions& frontend, const AudioConfig& audio);

// Throws kOutOfVocabulary naming every token of `manifest` that `vocab`
// lacks, with a hint to rebuild the vocabulary over all languages.
void CheckCoverage(const Manifest& manifest, const Vocabulary& vocab, const FrontendOptions& frontend);

// Sorted by id so the result does not depend on the order corpora were given.
Manifest LoadTrainingCorpus(const TrainPlan& plan);

// Average stage. The vocabulary must cover the training corpus; build it over
// every language that will later be fine-tuned.
AcousticBundle TrainAverageAcoustic(const TrainPlan& plan, const AMConfig& config, const Vocabulary& vocab,
                                    const FrontendOptions& frontend, const AudioConfig& audio,
                                    const StepCallback& on_step = nullptr);
AcousticBundle FinetuneAcoustic(const TrainPlan& plan, const StepCallback& on_step = nullptr);

// Mean teacher-forced loss over the examples (no parameter change).
AMLoss EvaluateAcoustic(const AcousticModel& model, const std::vector<AMExample>& examples);

// Vocoder examples conditioned on the acoustic model's teacher-forced mels.
std::vector<VocoderExample> MakeVocoderExamples(const Manifest& manifest, const AcousticBundle& am);

VocoderBundle TrainAverageVocoder(const TrainPlan& plan, const VocoderConfig& config, const AcousticBundle& am,
                                  const StepCallback& on_step = nullptr);
VocoderBundle FinetuneVocoder(const TrainPlan& plan, const AcousticBundle& am, const StepCallback& on_step = nullptr);

}  // namespace lrtts
