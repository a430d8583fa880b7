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
#include "pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "audio.hpp"

namespace lrtts {

namespace fs = std::filesystem;

nlohmann::json PipelineConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["work_dir"] = work_dir;
  j["raw_data"] = raw_data;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["audio"] = audio.ToJson();
  j["am"] = am.ToJson();
  j["vocoder"] = vocoder.ToJson();
  j["frontend"] = {{"lang_tags", frontend.lang_tags}, {"insert_pauses", frontend.insert_pauses}};
  j["prep"] = {{"max_len_s", prep.max_len_s},       {"frame_ms", prep.frame_ms},
               {"threshold_db", prep.threshold_db}, {"min_silence_ms", prep.min_silence_ms},
               {"min_rate", prep.min_rate},         {"max_rate", prep.max_rate},
               {"bin_width_s", prep.bin_width_s}};
  j["plans"] = plans;
  return j;
}

PipelineConfig PipelineConfig::FromJson(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    c.work_dir = j.value("work_dir", c.work_dir);
    c.raw_data = j.value("raw_data", c.raw_data);
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("audio")) c.audio = AudioConfig::FromJson(j.at("audio"));
    if (j.contains("am")) c.am = AMConfig::FromJson(j.at("am"));
    if (j.contains("vocoder")) c.vocoder = VocoderConfig::FromJson(j.at("vocoder"));
    if (j.contains("frontend")) {
      c.frontend.lang_tags = j.at("frontend").value("lang_tags", c.frontend.lang_tags);
      c.frontend.insert_pauses = j.at("frontend").value("insert_pauses", c.frontend.insert_pauses);
    }
    if (j.contains("prep")) {
      const auto& p = j.at("prep");
      c.prep.max_len_s = p.value("max_len_s", c.prep.max_len_s);
      c.prep.frame_ms = p.value("frame_ms", c.prep.frame_ms);
      c.prep.threshold_db = p.value("threshold_db", c.prep.threshold_db);
      c.prep.min_silence_ms = p.value("min_silence_ms", c.prep.min_silence_ms);
      c.prep.min_rate = p.value("min_rate", c.prep.min_rate);
      c.prep.max_rate = p.value("max_rate", c.prep.max_rate);
      c.prep.bin_width_s = p.value("bin_width_s", c.prep.bin_width_s);
    }
    c.plans = j.value("plans", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidArgument, std::string("malformed pipeline config: ") + e.what());
  }
  Require(c.jobs >= 1, "pipeline config: jobs must be >= 1");
  c.vocoder.Validate();
  return c;
}

PipelineConfig PipelineConfig::Load(const std::string& path) {
  std::ifstream f(path);
  if (!f) Fail(ErrorKind::kIo, "cannot read pipeline config " + path);
  try {
    return FromJson(nlohmann::json::parse(f));
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorKind::kInvalidArgument, "pipeline config " + path + " is not valid JSON: " + e.what());
  }
}

std::string PipelineConfig::Out(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (fs::path(work_dir) / p).string();
}

void ParallelFor(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> workers;
  const size_t count = std::min<size_t>(static_cast<size_t>(jobs), n);
  for (size_t w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

void EnsureParent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void WriteText(const std::string& path, const std::string& text) {
  EnsureParent(path);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) Fail(ErrorKind::kIo, "cannot write " + path);
  f << text;
}

uint64_t SubSeed(uint64_t seed, size_t index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

PrepResult RunPrep(const PipelineConfig& config, const std::string& manifest_path, const std::string& out_dir_arg) {
  const std::string out_dir = config.Out(out_dir_arg);
  const Manifest input = ReadManifest(manifest_path);
  fs::create_directories(fs::path(out_dir) / "wavs");
  SilenceOptions so;
  so.frame_ms = config.prep.frame_ms;
  so.threshold_db = config.prep.threshold_db;
  so.min_silence_ms = config.prep.min_silence_ms;
  so.sample_rate = config.audio.sample_rate;
  SegmentOptions seg;
  seg.max_len_s = config.prep.max_len_s;
  seg.frame_ms = config.prep.frame_ms;
  seg.sample_rate = config.audio.sample_rate;

  std::vector<SegmentationResult> per_utt(input.size());
  ParallelFor(input.size(), config.jobs, [&](size_t i) {
    const auto samples = LoadWav(input[i].wav_path);
    per_utt[i] = SegmentUtterance(input[i], samples, DetectSilence(samples, so), seg);
    for (auto& s : per_utt[i].segments) {
      const std::string wav = (fs::path(out_dir) / "wavs" / (s.utterance.id + ".wav")).string();
      SaveWav(wav, std::span<const double>(samples.data() + s.begin_sample,
                                           static_cast<size_t>(s.end_sample - s.begin_sample)));
      s.utterance.wav_path = wav;
    }
  });

  PrepResult r;
  Manifest segmented;
  for (auto& res : per_utt) {
    for (auto& s : res.segments) {
      segmented.push_back(s.utterance);
      r.segments.push_back(std::move(s));
    }
    for (auto& w : res.warnings) r.warnings.push_back(std::move(w));
  }
  auto filtered = FilterByRate(segmented, config.prep.min_rate, config.prep.max_rate);
  r.kept = std::move(filtered.kept);
  r.dropped = std::move(filtered.dropped);
  r.before = ComputeLengthHistogram(input, config.prep.bin_width_s);
  r.after = ComputeLengthHistogram(r.kept, config.prep.bin_width_s);
  WriteManifest((fs::path(out_dir) / "manifest.jsonl").string(), r.kept);
  WriteManifest((fs::path(out_dir) / "dropped.jsonl").string(), r.dropped);
  WriteHistogramCsv((fs::path(out_dir) / "hist_before.csv").string(), r.before);
  WriteHistogramCsv((fs::path(out_dir) / "hist_after.csv").string(), r.after);
  std::string warn;
  for (const auto& w : r.warnings) warn += w + "\n";
  WriteText((fs::path(out_dir) / "warnings.txt").string(), warn);
  return r;
}

Vocabulary RunVocab(const PipelineConfig& config, const std::vector<std::string>& manifests,
                    const std::string& out_path) {
  Require(!manifests.empty(), "vocab: at least one manifest is required");
  std::vector<Manifest> parts;
  for (const auto& m : manifests) parts.push_back(ReadManifest(m));
  const Vocabulary vocab = Vocabulary::Build(MergeCorpora(parts), config.frontend);
  const std::string out = config.Out(out_path);
  EnsureParent(out);
  vocab.Save(out);
  return vocab;
}

size_t RunFeatures(const PipelineConfig& config, const std::string& manifest_path, const std::string& out_dir_arg) {
  const std::string out_dir = config.Out(out_dir_arg);
  fs::create_directories(out_dir);
  const Manifest m = ReadManifest(manifest_path);
  ParallelFor(m.size(), config.jobs, [&](size_t i) {
    SaveMel((fs::path(out_dir) / (m[i].id + ".mel")).string(), ComputeMel(LoadWav(m[i].wav_path), config.audio));
  });
  return m.size();
}

TrainPlan PlanFromConfig(const PipelineConfig& config, const std::string& key, Stage stage) {
  TrainPlan plan;
  plan.stage = stage;
  plan.learning_rate = TrainPlan::DefaultLearningRate(stage);
  // The vocoder's NLL keeps improving as the step size shrinks.
  if (key.find("voc") != std::string::npos) plan.final_learning_rate = plan.learning_rate / 20.0;
  plan.seed = config.seed;
  if (!config.plans.contains(key)) return plan;
  const auto& j = config.plans.at(key);
  try {
    plan.corpora = j.value("corpora", plan.corpora);
    plan.steps = j.value("steps", plan.steps);
    plan.learning_rate = j.value("learning_rate", plan.learning_rate);
    plan.final_learning_rate = j.value("final_learning_rate", plan.final_learning_rate);
    plan.seed = j.value("seed", plan.seed);
    if (j.contains("init_from") && !j.at("init_from").is_null()) plan.init_from = j.at("init_from").get<std::string>();
    plan.batch_size = j.value("batch_size", plan.batch_size);
    plan.include_shdia = j.value("include_shdia", plan.include_shdia);
    plan.segment_samples = j.value("segment_samples", plan.segment_samples);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidArgument, "pipeline config: malformed plan '" + key + "': " + e.what());
  }
  return plan;
}

namespace {

StepCallback Progress(const LogFn& log, int steps, const char* what) {
  if (!log) return nullptr;
  const int every = std::max(1, steps / 20);
  return [log, steps, every, what](int step, double loss) {
    if (step % every == 0 || step + 1 == steps) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%s step %d/%d loss %.5f", what, step + 1, steps, loss);
      log(buf);
    }
  };
}

void Stamp(nlohmann::json& meta, const PipelineConfig& config, const TrainPlan& plan) {
  meta["pipeline_config"] = config.ToJson();
  meta["plan"] = plan.ToJson();
}

}  // namespace

AcousticBundle RunTrainAm(const PipelineConfig& config, const TrainPlan& plan, const std::string& vocab_path,
                          const std::string& out_ckpt, const LogFn& log) {
  const Vocabulary vocab = Vocabulary::Load(vocab_path);
  AcousticBundle b = TrainAverageAcoustic(plan, config.am, vocab, config.frontend, config.audio,
                                          Progress(log, plan.steps, "train-am"));
  Stamp(b.meta, config, plan);
  const std::string out = config.Out(out_ckpt);
  EnsureParent(out);
  SaveAcoustic(out, b);
  return b;
}

AcousticBundle RunFinetuneAm(const PipelineConfig& config, const TrainPlan& plan, const std::string& out_ckpt,
                             const LogFn& log) {
  AcousticBundle b = FinetuneAcoustic(plan, Progress(log, plan.steps, "finetune-am"));
  Stamp(b.meta, config, plan);
  const std::string out = config.Out(out_ckpt);
  EnsureParent(out);
  SaveAcoustic(out, b);
  return b;
}

VocoderBundle RunTrainVoc(const PipelineConfig& config, const TrainPlan& plan, const std::string& am_ckpt,
                          const std::string& out_ckpt, const LogFn& log) {
  const AcousticBundle am = LoadAcoustic(am_ckpt);
  VocoderConfig vc = config.vocoder;
  vc.conditioning_channels = am.audio.n_mels;
  vc.hop = am.audio.hop;
  vc.sample_rate = am.audio.sample_rate;
  VocoderBundle b = TrainAverageVocoder(plan, vc, am, Progress(log, plan.steps, "train-voc"));
  Stamp(b.meta, config, plan);
  b.meta["acoustic_checkpoint"] = am_ckpt;
  const std::string out = config.Out(out_ckpt);
  EnsureParent(out);
  SaveVocoder(out, b);
  return b;
}

VocoderBundle RunFinetuneVoc(const PipelineConfig& config, const TrainPlan& plan, const std::string& am_ckpt,
                             const std::string& out_ckpt, const LogFn& log) {
  const AcousticBundle am = LoadAcoustic(am_ckpt);
  VocoderBundle b = FinetuneVocoder(plan, am, Progress(log, plan.steps, "finetune-voc"));
  Stamp(b.meta, config, plan);
  b.meta["acoustic_checkpoint"] = am_ckpt;
  const std::string out = config.Out(out_ckpt);
  EnsureParent(out);
  SaveVocoder(out, b);
  return b;
}

MelSynthesis SynthesizeText(const AcousticBundle& am, const std::vector<std::string>& syllables, Lang lang) {
  Require(!syllables.empty(), "synthesis: empty transcript");
  const auto seq = EncodeTranscript(syllables, am.frontend.TokenLang(lang), am.vocab, am.frontend.insert_pauses);
  const SynthesisResult r = am.model.Synthesize(seq.ids);
  MelSynthesis out;
  out.mel.frames = DenormalizedMel(am, r.mel.frames);
  out.mel.hop_s = am.audio.hop_seconds();
  out.alignments = r.alignments;
  out.stopped_naturally = r.stopped_naturally;
  return out;
}

std::vector<double> MelToWaveform(const MelSpectrogram& mel, const AudioConfig& audio, const WaveformOptions& o) {
  if (o.kind == VocoderKind::kGriffinLim) return GriffinLim(mel, audio, o.griffin_lim_iters, o.seed);
  Require(o.vocoder != nullptr, "wavenet synthesis needs a vocoder checkpoint");
  Rng rng(o.seed);
  GenerateOptions g;
  g.deterministic = o.deterministic;
  return o.vocoder->model.GenerateIncremental(UpsampleConditioning(mel, o.vocoder->audio.hop), rng, g).audio;
}

MelSynthesis RunTts(const PipelineConfig& config, const std::string& am_ckpt, const std::string& text, Lang lang,
                    const WaveformOptions& options, const std::string& out_wav) {
  const AcousticBundle am = LoadAcoustic(am_ckpt);
  const MelSynthesis s = SynthesizeText(am, SplitSyllables(text), lang);
  const auto wav = MelToWaveform(s.mel, am.audio, options);
  const std::string out = config.Out(out_wav);
  EnsureParent(out);
  SaveWav(out, wav);
  SaveMel(out + ".mel", s.mel);
  WriteAlignmentCsv(out + ".align.csv", s.alignments);
  return s;
}

EvalReport RunReport(const PipelineConfig& config, const std::string& manifest_path, const std::string& am_ckpt,
                     const WaveformOptions& options, const std::string& out_dir_arg) {
  const std::string out_dir = config.Out(out_dir_arg);
  fs::create_directories(fs::path(out_dir) / "wavs");
  fs::create_directories(fs::path(out_dir) / "alignments");
  const Manifest m = ReadManifest(manifest_path);
  EvalReport report;
  report.rows.resize(m.size());
  std::optional<AcousticBundle> am;
  if (!m.empty()) am = LoadAcoustic(am_ckpt);
  ParallelFor(m.size(), config.jobs, [&](size_t i) {
    const Utterance& u = m[i];
    EvalRow& row = report.rows[i];
    row.utt_id = u.id;
    try {
      const auto seq = EncodeTranscript(u.syllables, am->frontend.TokenLang(u.lang), am->vocab, am->frontend.insert_pauses);
      const MelSynthesis s = SynthesizeText(*am, u.syllables, u.lang);
      const AlignmentScores a = AlignmentDiagnostics(s.alignments);
      row.monotonicity = a.monotonicity;
      row.coverage = a.coverage;
      row.stopped = s.stopped_naturally;
      MelSpectrogram gt = ComputeMel(LoadWav(u.wav_path), am->audio);
      MelSpectrogram tf;
      tf.frames = DenormalizedMel(*am, am->model.TeacherForced(seq.ids, NormalizedMel(*am, gt.frames)).mel.frames);
      row.mcd_db = Mcd(gt, tf);
      WaveformOptions wo = options;
      wo.seed = SubSeed(options.seed, i);
      SaveWav((fs::path(out_dir) / "wavs" / (u.id + ".wav")).string(), MelToWaveform(s.mel, am->audio, wo));
      WriteAlignmentCsv((fs::path(out_dir) / "alignments" / (u.id + ".csv")).string(), s.alignments);
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
    }
  });
  report.WriteCsv((fs::path(out_dir) / "report.csv").string());
  report.WriteJson((fs::path(out_dir) / "report.json").string());
  return report;
}

BenchResult RunBenchVoc(const PipelineConfig& config, const std::string& voc_ckpt, double seconds,
                        const std::string& out_csv) {
  Require(seconds > 0.0, "bench-voc: seconds must be positive");
  const VocoderBundle v = LoadVocoder(voc_ckpt);
  const int hop = v.model.config().hop;
  const Index frames = std::max<Index>(1, static_cast<Index>(std::ceil(seconds * v.model.config().sample_rate / hop)));
  Rng rng(config.seed);
  ConditioningTrack cond{Mat::Constant(frames, v.model.config().conditioning_channels, std::log(v.audio.log_floor)),
                         hop};
  for (Index i = 0; i < cond.frames.size(); ++i) cond.frames.data()[i] += rng.Uniform(0.0, 4.0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = v.model.GenerateIncremental(cond, rng);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  BenchResult b;
  b.samples_per_second = static_cast<double>(r.audio.size()) / wall;
  b.rtf = wall / (static_cast<double>(r.audio.size()) / v.model.config().sample_rate);
  const std::string out = config.Out(out_csv);
  EnsureParent(out);
  char line[128];
  std::snprintf(line, sizeof(line), "samples_per_second,rtf\n%.3f,%.6f\n", b.samples_per_second, b.rtf);
  WriteText(out, line);
  return b;
}

}  // namespace lrtts
