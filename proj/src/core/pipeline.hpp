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

#include "corpus_prep.hpp"
#include "eval.hpp"
#include "toy_corpus.hpp"
#include "transfer.hpp"

namespace lrtts {

struct PrepOptions {
  double max_len_s = 7.0;
  double frame_ms = 25.0;
  double threshold_db = -40.0;
  double min_silence_ms = 300.0;
  double min_rate = 2.0;
  double max_rate = 12.0;
  double bin_width_s = 1.0;
};

// Everything a command needs; serialized into the artifacts it writes.
struct PipelineConfig {
  std::string work_dir = ".";
  std::string raw_data;
  uint64_t seed = 0;
  int jobs = 1;
  AudioConfig audio;
  AMConfig am;
  VocoderConfig vocoder;
  FrontendOptions frontend;
  PrepOptions prep;
  // Optional plan templates; CLI flags override individual fields.
  nlohmann::json plans = nlohmann::json::object();

  nlohmann::json ToJson() const;
  static PipelineConfig FromJson(const nlohmann::json& j);
  static PipelineConfig Load(const std::string& path);
  // Relative paths land under work_dir; absolute paths are kept.
  std::string Out(const std::string& path) const;
};

using LogFn = std::function<void(const std::string&)>;

// Runs fn(i) for i in [0, n) on `jobs` threads. The first exception is
// rethrown after all workers finish.
void ParallelFor(size_t n, int jobs, const std::function<void(size_t)>& fn);

struct PrepResult {
  Manifest kept;
  Manifest dropped;
  std::vector<Segment> segments;  // before the rate filter
  LengthHistogram before;
  LengthHistogram after;
  std::vector<std::string> warnings;
};

// Writes <out_dir>/wavs/*.wav, manifest.jsonl, dropped.jsonl,
// hist_before.csv, hist_after.csv and warnings.txt.
PrepResult RunPrep(const PipelineConfig& config, const std::string& manifest_path, const std::string& out_dir);

Vocabulary RunVocab(const PipelineConfig& config, const std::vector<std::string>& manifests, const std::string& out_path);

// Log-mel of every utterance into <out_dir>/<id>.mel. Returns the count.
size_t RunFeatures(const PipelineConfig& config, const std::string& manifest_path, const std::string& out_dir);

TrainPlan PlanFromConfig(const PipelineConfig& config, const std::string& key, Stage stage);

AcousticBundle RunTrainAm(const PipelineConfig& config, const TrainPlan& plan, const std::string& vocab_path,
                          const std::string& out_ckpt, const LogFn& log = nullptr);
AcousticBundle RunFinetuneAm(const PipelineConfig& config, const TrainPlan& plan, const std::string& out_ckpt,
                             const LogFn& log = nullptr);
VocoderBundle RunTrainVoc(const PipelineConfig& config, const TrainPlan& plan, const std::string& am_ckpt,
                          const std::string& out_ckpt, const LogFn& log = nullptr);
VocoderBundle RunFinetuneVoc(const PipelineConfig& config, const TrainPlan& plan, const std::string& am_ckpt,
                             const std::string& out_ckpt, const LogFn& log = nullptr);

struct MelSynthesis {
  MelSpectrogram mel;  // log-mel space
  Mat alignments;
  bool stopped_naturally = false;
};

MelSynthesis SynthesizeText(const AcousticBundle& am, const std::vector<std::string>& syllables, Lang lang);

enum class VocoderKind { kWaveNet, kGriffinLim };

struct WaveformOptions {
  VocoderKind kind = VocoderKind::kGriffinLim;
  const VocoderBundle* vocoder = nullptr;  // required for kWaveNet
  uint64_t seed = 0;
  bool deterministic = false;
  int griffin_lim_iters = 60;
};

std::vector<double> MelToWaveform(const MelSpectrogram& mel, const AudioConfig& audio, const WaveformOptions& options);

// Text to WAV; also writes <out_wav>.mel and <out_wav>.align.csv.
MelSynthesis RunTts(const PipelineConfig& config, const std::string& am_ckpt, const std::string& text, Lang lang,
                    const WaveformOptions& options, const std::string& out_wav);

// Synthesizes every utterance of the manifest, writes WAVs, alignment CSVs,
// report.csv and report.json under out_dir. Per-utterance failures become
// failed rows.
EvalReport RunReport(const PipelineConfig& config, const std::string& manifest_path, const std::string& am_ckpt,
                     const WaveformOptions& options, const std::string& out_dir);

struct BenchResult {
  double samples_per_second = 0.0;
  double rtf = 0.0;  // wall time / audio duration
};

// Times incremental generation of `seconds` of audio; writes a CSV row.
BenchResult RunBenchVoc(const PipelineConfig& config, const std::string& voc_ckpt, double seconds,
                        const std::string& out_csv);

}  // namespace lrtts
