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
#include "transfer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "audio.hpp"

namespace lrtts {

Manifest MergeCorpora(const std::vector<Manifest>& manifests) {
  Manifest out;
  std::set<std::string> seen;
  for (const auto& m : manifests) {
    for (const auto& u : m) {
      if (!seen.insert(u.id).second) Fail(ErrorKind::kInvalidArgument, "merge_corpora: duplicate utterance id '" + u.id + "'");
      out.push_back(u);
    }
  }
  return out;
}

void TrainPlan::Validate() const {
  Require(!corpora.empty(), "train plan: at least one corpus is required");
  Require(steps >= 0, "train plan: steps must be non-negative");
  Require(learning_rate >= 0.0 && std::isfinite(learning_rate), "train plan: learning_rate must be >= 0");
  Require(final_learning_rate >= 0.0 && std::isfinite(final_learning_rate),
          "train plan: final_learning_rate must be >= 0");
  Require(batch_size >= 1, "train plan: batch_size must be positive");
  Require(segment_samples >= 0, "train plan: segment_samples must be non-negative");
  if (stage == Stage::kFinetune) Require(init_from.has_value(), "train plan: finetune stage requires init_from");
}

nlohmann::json TrainPlan::ToJson() const {
  nlohmann::ordered_json j;
  j["stage"] = stage == Stage::kAverage ? "average" : "finetune";
  j["corpora"] = corpora;
  j["steps"] = steps;
  j["learning_rate"] = learning_rate;
  j["final_learning_rate"] = final_learning_rate;
  j["seed"] = seed;
  if (init_from) j["init_from"] = *init_from;
  j["batch_size"] = batch_size;
  j["include_shdia"] = include_shdia;
  j["segment_samples"] = segment_samples;
  return j;
}

TrainPlan TrainPlan::FromJson(const nlohmann::json& j) {
  TrainPlan p;
  const std::string stage = j.value("stage", std::string("average"));
  if (stage == "average") {
    p.stage = Stage::kAverage;
  } else if (stage == "finetune") {
    p.stage = Stage::kFinetune;
  } else {
    Fail(ErrorKind::kInvalidArgument, "train plan: unknown stage '" + stage + "'");
  }
  p.corpora = j.value("corpora", std::vector<std::string>{});
  p.steps = j.value("steps", p.steps);
  p.learning_rate = j.value("learning_rate", DefaultLearningRate(p.stage));
  p.final_learning_rate = j.value("final_learning_rate", p.final_learning_rate);
  p.seed = j.value("seed", p.seed);
  if (j.contains("init_from") && !j.at("init_from").is_null()) p.init_from = j.at("init_from").get<std::string>();
  p.batch_size = j.value("batch_size", p.batch_size);
  p.include_shdia = j.value("include_shdia", p.include_shdia);
  p.segment_samples = j.value("segment_samples", p.segment_samples);
  p.Validate();
  return p;
}

double ScheduledLearningRate(const TrainPlan& plan, int step) {
  if (plan.final_learning_rate <= 0.0 || plan.learning_rate <= 0.0 || plan.steps <= 1) return plan.learning_rate;
  const double frac = static_cast<double>(step) / static_cast<double>(plan.steps - 1);
  return plan.learning_rate * std::pow(plan.final_learning_rate / plan.learning_rate, frac);
}

TrainPlan TrainPlan::Load(const std::string& path) {
  std::ifstream f(path);
  if (!f) Fail(ErrorKind::kIo, "cannot read train plan " + path);
  try {
    return FromJson(nlohmann::json::parse(f));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidArgument, "malformed train plan " + path + ": " + e.what());
  }
}

namespace {

nlohmann::json VocabJson(const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  for (const auto& t : vocab.tokens()) tokens.push_back(t.ToString());
  return tokens;
}

Vocabulary VocabFromJson(const nlohmann::json& j) {
  std::vector<LetterToken> tokens;
  for (const auto& s : j) tokens.push_back(LetterToken::Parse(s.get<std::string>()));
  return Vocabulary::FromTokens(tokens);
}

struct MelNorm {
  RowVec mean;
  RowVec std;
  bool active() const { return mean.size() > 0; }
};

MelNorm ReadNorm(const nlohmann::json& meta) {
  MelNorm n;
  if (!meta.contains("mel_norm")) return n;
  const auto mean = meta.at("mel_norm").at("mean").get<std::vector<double>>();
  const auto std = meta.at("mel_norm").at("std").get<std::vector<double>>();
  n.mean = Eigen::Map<const RowVec>(mean.data(), static_cast<Index>(mean.size()));
  n.std = Eigen::Map<const RowVec>(std.data(), static_cast<Index>(std.size()));
  return n;
}

void Normalize(std::vector<AMExample>& examples, const MelNorm& n) {
  if (!n.active()) return;
  for (auto& ex : examples) ex.mel = ((ex.mel.rowwise() - n.mean).array().rowwise() / n.std.array()).matrix();
}

MelNorm ComputeNorm(const std::vector<AMExample>& examples, int n_mels) {
  MelNorm n;
  n.mean = RowVec::Zero(n_mels);
  RowVec sq = RowVec::Zero(n_mels);
  double count = 0.0;
  for (const auto& ex : examples) {
    n.mean += ex.mel.colwise().sum();
    sq += ex.mel.array().square().matrix().colwise().sum();
    count += static_cast<double>(ex.mel.rows());
  }
  n.mean /= count;
  n.std = (sq.array() / count - n.mean.array().square()).max(1e-8).sqrt().matrix();
  return n;
}

// Cycles through a seeded permutation of [0, n), reshuffling every epoch.
class BatchSampler {
 public:
  BatchSampler(size_t n, uint64_t seed) : rng_(seed), order_(n) {
    for (size_t i = 0; i < n; ++i) order_[i] = i;
    rng_.Shuffle(order_);
  }
  std::vector<size_t> Next(size_t batch) {
    std::vector<size_t> out;
    const size_t take = std::min(batch, order_.size());
    while (out.size() < take) {
      if (pos_ == order_.size()) {
        rng_.Shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }
  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  std::vector<size_t> order_;
  size_t pos_ = 0;
};

std::vector<std::string> Ids(const Manifest& m) {
  std::vector<std::string> ids;
  for (const auto& u : m) ids.push_back(u.id);
  return ids;
}

void TrainAcousticLoop(AcousticModel& model, const std::vector<AMExample>& examples, const TrainPlan& plan,
                       nlohmann::json& meta, const StepCallback& on_step) {
  AdamConfig ac;
  ac.learning_rate = plan.learning_rate;
  Adam adam(ac);
  BatchSampler sampler(examples.size(), plan.seed ^ 0xA11CEull);
  Rng tf_rng(plan.seed ^ 0x7EAC4ull);
  std::vector<double> losses;
  for (int step = 0; step < plan.steps; ++step) {
    std::vector<AMExample> batch;
    for (size_t i : sampler.Next(static_cast<size_t>(plan.batch_size))) batch.push_back(examples[i]);
    adam.set_learning_rate(ScheduledLearningRate(plan, step));
    const AMLoss loss = model.TrainStep(batch, adam, &tf_rng);
    losses.push_back(loss.total());
    if (on_step) on_step(step, loss.total());
  }
  meta["steps"] = plan.steps;
  meta["loss_history"] = losses;
}

}  // namespace

void SaveAcoustic(const std::string& path, const AcousticBundle& b) {
  Checkpoint c;
  c.kind = ModelKind::kAcoustic;
  c.config = {{"am", b.model.config().ToJson()},
              {"vocab", VocabJson(b.vocab)},
              {"frontend", {{"lang_tags", b.frontend.lang_tags}, {"insert_pauses", b.frontend.insert_pauses}}},
              {"audio", b.audio.ToJson()}};
  if (b.meta.contains("mel_norm")) c.config["mel_norm"] = b.meta.at("mel_norm");
  c.meta = b.meta;
  c.meta.erase("mel_norm");
  c.tensors = b.model.params();
  SaveCheckpoint(path, c);
}

AcousticBundle LoadAcoustic(const std::string& path) {
  Checkpoint c = LoadCheckpoint(path, ModelKind::kAcoustic);
  try {
    AMConfig cfg = AMConfig::FromJson(c.config.at("am"));
    Vocabulary vocab = VocabFromJson(c.config.at("vocab"));
    if (vocab.size() != cfg.vocab_size) {
      Fail(ErrorKind::kShape, "checkpoint " + path + ": vocabulary has " + std::to_string(vocab.size()) +
                                  " entries but config says " + std::to_string(cfg.vocab_size));
    }
    FrontendOptions fe;
    fe.lang_tags = c.config.at("frontend").value("lang_tags", true);
    fe.insert_pauses = c.config.at("frontend").value("insert_pauses", false);
    AcousticBundle b{AcousticModel(cfg, std::move(c.tensors)), std::move(vocab), fe,
                     AudioConfig::FromJson(c.config.at("audio")), c.meta};
    if (c.config.contains("mel_norm")) b.meta["mel_norm"] = c.config.at("mel_norm");
    return b;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kCorrupt, "checkpoint " + path + " has a malformed config: " + e.what());
  }
}

void SaveVocoder(const std::string& path, const VocoderBundle& b) {
  Checkpoint c;
  c.kind = ModelKind::kVocoder;
  c.config = {{"vocoder", b.model.config().ToJson()}, {"audio", b.audio.ToJson()}};
  c.meta = b.meta;
  c.tensors = b.model.params();
  SaveCheckpoint(path, c);
}

VocoderBundle LoadVocoder(const std::string& path) {
  Checkpoint c = LoadCheckpoint(path, ModelKind::kVocoder);
  try {
    return {Vocoder(VocoderConfig::FromJson(c.config.at("vocoder")), std::move(c.tensors)),
            AudioConfig::FromJson(c.config.at("audio")), c.meta};
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kCorrupt, "checkpoint " + path + " has a malformed config: " + e.what());
  }
}

std::vector<AMExample> MakeAcousticExamples(const Manifest& manifest, const Vocabulary& vocab,
                                            const FrontendOptions& frontend, const AudioConfig& audio) {
  std::vector<AMExample> out;
  out.reserve(manifest.size());
  for (const auto& u : manifest) {
    const auto seq = EncodeTranscript(u.syllables, frontend.TokenLang(u.lang), vocab, frontend.insert_pauses);
    out.push_back({seq.ids, ComputeMel(LoadWav(u.wav_path), audio).frames});
  }
  return out;
}

void CheckCoverage(const Manifest& manifest, const Vocabulary& vocab, const FrontendOptions& frontend) {
  std::set<std::string> missing;
  for (const auto& u : manifest) {
    for (const auto& syl : u.syllables) {
      for (const auto& tok : TagLanguage(SyllableToLetters(syl), frontend.TokenLang(u.lang))) {
        if (!vocab.Find(tok)) missing.insert(tok.ToString());
      }
    }
  }
  if (missing.empty()) return;
  std::string list;
  for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
  Fail(ErrorKind::kOutOfVocabulary,
       "target corpus uses tokens missing from the checkpoint vocabulary: " + list +
           ". Rebuild the vocabulary over every language (including the target) and retrain the average model.");
}

Manifest LoadTrainingCorpus(const TrainPlan& plan) {
  plan.Validate();
  std::vector<Manifest> parts;
  for (const auto& path : plan.corpora) parts.push_back(ReadManifest(path));
  Manifest merged = MergeCorpora(parts);
  if (plan.stage == Stage::kAverage && !plan.include_shdia) {
    std::erase_if(merged, [](const Utterance& u) { return u.lang == Lang::kShdia; });
  }
  std::sort(merged.begin(), merged.end(), [](const Utterance& a, const Utterance& b) { return a.id < b.id; });
  Require(!merged.empty(), "training corpus is empty after filtering");
  return merged;
}

AcousticBundle TrainAverageAcoustic(const TrainPlan& plan, const AMConfig& config, const Vocabulary& vocab,
                                    const FrontendOptions& frontend, const AudioConfig& audio,
                                    const StepCallback& on_step) {
  Require(plan.stage == Stage::kAverage, "train_average: plan stage must be average");
  const Manifest corpus = LoadTrainingCorpus(plan);
  CheckCoverage(corpus, vocab, frontend);
  auto examples = MakeAcousticExamples(corpus, vocab, frontend, audio);
  AMConfig cfg = config;
  cfg.vocab_size = vocab.size();
  cfg.n_mels = audio.n_mels;

  nlohmann::json meta;
  MelNorm norm;
  if (audio.normalize) {
    norm = ComputeNorm(examples, audio.n_mels);
    meta["mel_norm"] = {{"mean", std::vector<double>(norm.mean.data(), norm.mean.data() + norm.mean.size())},
                        {"std", std::vector<double>(norm.std.data(), norm.std.data() + norm.std.size())}};
    Normalize(examples, norm);
  }
  AcousticModel model = AcousticModel::Initialize(cfg, plan.seed);
  // The mel head starts at the corpus mean frame.
  Mat mean = Mat::Zero(1, cfg.n_mels);
  double frames = 0.0;
  for (const auto& ex : examples) {
    mean += ex.mel.colwise().sum();
    frames += static_cast<double>(ex.mel.rows());
  }
  mean /= frames;
  RoundToFloat(mean);
  model.mutable_params()["dec.proj.b"] = mean;

  meta["stage"] = "average";
  meta["seed"] = plan.seed;
  meta["learning_rate"] = plan.learning_rate;
  meta["corpus_ids"] = Ids(corpus);
  TrainAcousticLoop(model, examples, plan, meta, on_step);
  return {std::move(model), vocab, frontend, audio, meta};
}

AcousticBundle FinetuneAcoustic(const TrainPlan& plan, const StepCallback& on_step) {
  Require(plan.stage == Stage::kFinetune, "finetune: plan stage must be finetune");
  plan.Validate();
  AcousticBundle b = LoadAcoustic(*plan.init_from);
  const Manifest corpus = LoadTrainingCorpus(plan);
  CheckCoverage(corpus, b.vocab, b.frontend);
  auto examples = MakeAcousticExamples(corpus, b.vocab, b.frontend, b.audio);
  Normalize(examples, ReadNorm(b.meta));
  nlohmann::json meta;
  if (b.meta.contains("mel_norm")) meta["mel_norm"] = b.meta.at("mel_norm");
  meta["stage"] = "finetune";
  meta["seed"] = plan.seed;
  meta["learning_rate"] = plan.learning_rate;
  meta["init_from"] = *plan.init_from;
  meta["corpus_ids"] = Ids(corpus);
  TrainAcousticLoop(b.model, examples, plan, meta, on_step);
  b.meta = meta;
  return b;
}

AMLoss EvaluateAcoustic(const AcousticModel& model, const std::vector<AMExample>& examples) {
  Require(!examples.empty(), "evaluate: no examples");
  AMLoss sum;
  for (const auto& ex : examples) {
    const AMLoss l = model.Loss({ex});
    sum.mel_pre += l.mel_pre;
    sum.mel_post += l.mel_post;
    sum.stop += l.stop;
    sum.attention += l.attention;
  }
  const double n = static_cast<double>(examples.size());
  return {sum.mel_pre / n, sum.mel_post / n, sum.stop / n, sum.attention / n};
}

Mat DenormalizedMel(const AcousticBundle& am, const Mat& model_space) {
  const MelNorm n = ReadNorm(am.meta);
  if (!n.active()) return model_space;
  return ((model_space.array().rowwise() * n.std.array()).matrix().rowwise() + n.mean);
}

Mat NormalizedMel(const AcousticBundle& am, const Mat& log_mel) {
  std::vector<AMExample> one = {{{}, log_mel}};
  Normalize(one, ReadNorm(am.meta));
  return one[0].mel;
}

std::vector<VocoderExample> MakeVocoderExamples(const Manifest& manifest, const AcousticBundle& am) {
  std::vector<VocoderExample> out;
  const MelNorm norm = ReadNorm(am.meta);
  for (const auto& u : manifest) {
    const auto audio = LoadWav(u.wav_path);
    std::vector<AMExample> one = {{EncodeTranscript(u.syllables, am.frontend.TokenLang(u.lang), am.vocab,
                                                    am.frontend.insert_pauses).ids,
                                   ComputeMel(audio, am.audio).frames}};
    Normalize(one, norm);
    MelSpectrogram pred;
    pred.frames = DenormalizedMel(am, am.model.TeacherForced(one[0].ids, one[0].mel).mel.frames);
    pred.hop_s = am.audio.hop_seconds();
    VocoderExample ex{std::vector<double>(audio.begin(), audio.end()), UpsampleConditioning(pred, am.audio.hop)};
    ex.audio.resize(static_cast<size_t>(ex.cond.size()), 0.0);
    ex.audio = SnapTo16Bit(ex.audio);
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

VocoderExample Crop(const VocoderExample& ex, int segment_samples, Rng& rng) {
  const int hop = ex.cond.hop;
  const Index frames = ex.cond.frames.rows();
  const Index seg_frames = segment_samples <= 0 ? frames : std::min<Index>(frames, std::max(1, segment_samples / hop));
  const Index start = static_cast<Index>(rng.Below(static_cast<uint64_t>(frames - seg_frames + 1)));
  VocoderExample c;
  c.cond.hop = hop;
  c.cond.frames = ex.cond.frames.middleRows(start, seg_frames);
  c.audio.assign(ex.audio.begin() + start * hop, ex.audio.begin() + (start + seg_frames) * hop);
  return c;
}

void TrainVocoderLoop(Vocoder& model, const std::vector<VocoderExample>& examples, const TrainPlan& plan,
                      nlohmann::json& meta, const StepCallback& on_step) {
  AdamConfig ac;
  ac.learning_rate = plan.learning_rate;
  Adam adam(ac);
  BatchSampler sampler(examples.size(), plan.seed ^ 0xB0C0ull);
  std::vector<double> losses;
  for (int step = 0; step < plan.steps; ++step) {
    std::vector<VocoderExample> batch;
    for (size_t i : sampler.Next(static_cast<size_t>(plan.batch_size))) {
      batch.push_back(Crop(examples[i], plan.segment_samples, sampler.rng()));
    }
    adam.set_learning_rate(ScheduledLearningRate(plan, step));
    const double nll = model.TrainStep(batch, adam);
    losses.push_back(nll);
    if (on_step) on_step(step, nll);
  }
  meta["steps"] = plan.steps;
  meta["loss_history"] = losses;
}

}  // namespace

VocoderBundle TrainAverageVocoder(const TrainPlan& plan, const VocoderConfig& config, const AcousticBundle& am,
                                  const StepCallback& on_step) {
  Require(plan.stage == Stage::kAverage, "train_average: plan stage must be average");
  Require(config.conditioning_channels == am.audio.n_mels, "vocoder conditioning width must equal n_mels");
  Require(config.hop == am.audio.hop, "vocoder hop must equal the feature hop");
  const Manifest corpus = LoadTrainingCorpus(plan);
  const auto examples = MakeVocoderExamples(corpus, am);
  Vocoder model = Vocoder::Initialize(config, plan.seed);
  nlohmann::json meta;
  meta["stage"] = "average";
  meta["seed"] = plan.seed;
  meta["learning_rate"] = plan.learning_rate;
  meta["corpus_ids"] = Ids(corpus);
  TrainVocoderLoop(model, examples, plan, meta, on_step);
  return {std::move(model), am.audio, meta};
}

VocoderBundle FinetuneVocoder(const TrainPlan& plan, const AcousticBundle& am, const StepCallback& on_step) {
  Require(plan.stage == Stage::kFinetune, "finetune: plan stage must be finetune");
  plan.Validate();
  VocoderBundle b = LoadVocoder(*plan.init_from);
  const Manifest corpus = LoadTrainingCorpus(plan);
  const auto examples = MakeVocoderExamples(corpus, am);
  nlohmann::json meta;
  meta["stage"] = "finetune";
  meta["seed"] = plan.seed;
  meta["learning_rate"] = plan.learning_rate;
  meta["init_from"] = *plan.init_from;
  meta["corpus_ids"] = Ids(corpus);
  TrainVocoderLoop(b.model, examples, plan, meta, on_step);
  b.meta = meta;
  return b;
}

}  // namespace lrtts
