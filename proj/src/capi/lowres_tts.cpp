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
#include "lowres_tts/lowres_tts.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pipeline.hpp"

struct lrtts_pipeline {
  lrtts::PipelineConfig config;
  lrtts::LogFn log;
};

struct lrtts_acoustic {
  lrtts::AcousticBundle bundle;
};

struct lrtts_vocoder {
  lrtts::VocoderBundle bundle;
};

struct lrtts_mel {
  lrtts::MelSpectrogram mel;
};

namespace {

thread_local std::string g_last_error;

lrtts_status ToStatus(lrtts::ErrorKind kind) {
  switch (kind) {
    case lrtts::ErrorKind::kInvalidArgument: return LRTTS_INVALID_ARGUMENT;
    case lrtts::ErrorKind::kIo: return LRTTS_IO_ERROR;
    case lrtts::ErrorKind::kCorrupt: return LRTTS_CORRUPT;
    case lrtts::ErrorKind::kVersion: return LRTTS_VERSION_MISMATCH;
    case lrtts::ErrorKind::kShape: return LRTTS_SHAPE_MISMATCH;
    case lrtts::ErrorKind::kKind: return LRTTS_KIND_MISMATCH;
    case lrtts::ErrorKind::kOutOfVocabulary: return LRTTS_OUT_OF_VOCABULARY;
    case lrtts::ErrorKind::kNumeric: return LRTTS_NUMERIC;
  }
  return LRTTS_INTERNAL;
}

template <typename F>
lrtts_status Guard(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return LRTTS_OK;
  } catch (const lrtts::Error& e) {
    g_last_error = e.what();
    return ToStatus(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LRTTS_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LRTTS_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return LRTTS_INTERNAL;
  }
}

void NotNull(const void* p, const char* what) {
  if (p == nullptr) lrtts::Fail(lrtts::ErrorKind::kInvalidArgument, std::string(what) + " is null");
}

std::string Str(const char* s, const char* what) {
  NotNull(s, what);
  return s;
}

lrtts::TrainPlan MakePlan(const lrtts_pipeline* p, const lrtts_train_options* o, const char* key,
                          lrtts::Stage stage) {
  lrtts::TrainPlan plan = lrtts::PlanFromConfig(p->config, key, stage);
  if (o == nullptr) return plan;
  if (o->plan_path != nullptr) {
    plan = lrtts::TrainPlan::Load(o->plan_path);
    plan.stage = stage;
  }
  if (o->n_corpora > 0) {
    NotNull(o->corpora, "corpora");
    plan.corpora.clear();
    for (size_t i = 0; i < o->n_corpora; ++i) plan.corpora.push_back(Str(o->corpora[i], "corpus path"));
  }
  if (o->steps >= 0) plan.steps = o->steps;
  if (o->learning_rate >= 0) plan.learning_rate = o->learning_rate;
  if (o->final_learning_rate >= 0) plan.final_learning_rate = o->final_learning_rate;
  if (o->batch_size > 0) plan.batch_size = o->batch_size;
  if (o->include_shdia >= 0) plan.include_shdia = o->include_shdia != 0;
  if (o->segment_samples >= 0) plan.segment_samples = o->segment_samples;
  if (o->init_from != nullptr) plan.init_from = std::string(o->init_from);
  if (o->has_seed) plan.seed = o->seed;
  plan.Validate();
  return plan;
}

lrtts::WaveformOptions MakeWaveform(const lrtts_waveform_options* o, uint64_t seed,
                                    std::optional<lrtts::VocoderBundle>& holder) {
  lrtts_waveform_options d;
  lrtts_waveform_options_init(&d);
  if (o == nullptr) o = &d;
  lrtts::WaveformOptions w;
  w.seed = seed;
  w.deterministic = o->deterministic != 0;
  if (o->griffin_lim_iters > 0) w.griffin_lim_iters = o->griffin_lim_iters;
  if (o->vocoder == LRTTS_VOCODER_WAVENET) {
    holder = lrtts::LoadVocoder(Str(o->vocoder_ckpt, "vocoder checkpoint"));
    w.kind = lrtts::VocoderKind::kWaveNet;
    w.vocoder = &*holder;
  } else if (o->vocoder == LRTTS_VOCODER_GRIFFINLIM) {
    w.kind = lrtts::VocoderKind::kGriffinLim;
  } else {
    lrtts::Fail(lrtts::ErrorKind::kInvalidArgument, "unknown vocoder kind");
  }
  return w;
}

}  // namespace

extern "C" {

const char* lrtts_version(void) { return "0.1.0"; }

const char* lrtts_status_name(lrtts_status status) {
  switch (status) {
    case LRTTS_OK: return "ok";
    case LRTTS_INVALID_ARGUMENT: return "invalid argument";
    case LRTTS_IO_ERROR: return "io error";
    case LRTTS_CORRUPT: return "corrupt";
    case LRTTS_VERSION_MISMATCH: return "version mismatch";
    case LRTTS_SHAPE_MISMATCH: return "shape mismatch";
    case LRTTS_KIND_MISMATCH: return "kind mismatch";
    case LRTTS_OUT_OF_VOCABULARY: return "out of vocabulary";
    case LRTTS_NUMERIC: return "numeric error";
    case LRTTS_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* lrtts_last_error(void) { return g_last_error.c_str(); }

lrtts_status lrtts_pipeline_create(const char* config_path, lrtts_pipeline** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = nullptr;
    auto p = std::make_unique<lrtts_pipeline>();
    if (config_path != nullptr) p->config = lrtts::PipelineConfig::Load(config_path);
    if (const char* wd = std::getenv("LOWRES_TTS_WORKDIR"); wd != nullptr && *wd != '\0') p->config.work_dir = wd;
    *out = p.release();
  });
}

void lrtts_pipeline_destroy(lrtts_pipeline* p) { delete p; }

lrtts_status lrtts_pipeline_set_work_dir(lrtts_pipeline* p, const char* dir) {
  return Guard([&] {
    NotNull(p, "pipeline");
    p->config.work_dir = Str(dir, "work dir");
  });
}

lrtts_status lrtts_pipeline_set_seed(lrtts_pipeline* p, uint64_t seed) {
  return Guard([&] {
    NotNull(p, "pipeline");
    p->config.seed = seed;
  });
}

lrtts_status lrtts_pipeline_set_jobs(lrtts_pipeline* p, int jobs) {
  return Guard([&] {
    NotNull(p, "pipeline");
    lrtts::Require(jobs >= 1, "jobs must be >= 1");
    p->config.jobs = jobs;
  });
}

lrtts_status lrtts_pipeline_set_frontend(lrtts_pipeline* p, int lang_tags, int insert_pauses) {
  return Guard([&] {
    NotNull(p, "pipeline");
    p->config.frontend.lang_tags = lang_tags != 0;
    p->config.frontend.insert_pauses = insert_pauses != 0;
  });
}

lrtts_status lrtts_pipeline_set_log(lrtts_pipeline* p, lrtts_log_fn fn, void* user) {
  return Guard([&] {
    NotNull(p, "pipeline");
    if (fn == nullptr) {
      p->log = nullptr;
    } else {
      p->log = [fn, user](const std::string& line) { fn(line.c_str(), user); };
    }
  });
}

lrtts_status lrtts_pipeline_save_config(const lrtts_pipeline* p, const char* path) {
  return Guard([&] {
    NotNull(p, "pipeline");
    const std::string out = Str(path, "path");
    std::ofstream f(out);
    if (!f) lrtts::Fail(lrtts::ErrorKind::kIo, "cannot write " + out);
    f << p->config.ToJson().dump(2) << '\n';
    if (!f) lrtts::Fail(lrtts::ErrorKind::kIo, "write failed: " + out);
  });
}

void lrtts_toy_options_init(lrtts_toy_options* o) {
  if (o == nullptr) return;
  const lrtts::ToyCorpusOptions d;
  o->n_utts = d.n_utts;
  o->mand_fraction = d.mand_fraction;
  o->min_syllables = d.min_syllables;
  o->max_syllables = d.max_syllables;
  o->long_form = d.long_form ? 1 : 0;
  o->amplitude = d.amplitude;
  o->id_prefix = nullptr;
}

lrtts_status lrtts_gen_toycorpus(lrtts_pipeline* p, const lrtts_toy_options* o, const char* out_dir) {
  return Guard([&] {
    NotNull(p, "pipeline");
    lrtts::ToyCorpusOptions t;
    if (o != nullptr) {
      t.n_utts = o->n_utts;
      t.mand_fraction = o->mand_fraction;
      t.min_syllables = o->min_syllables;
      t.max_syllables = o->max_syllables;
      t.long_form = o->long_form != 0;
      t.amplitude = o->amplitude;
      if (o->id_prefix != nullptr) t.id_prefix = o->id_prefix;
    }
    t.seed = p->config.seed;
    lrtts::GenerateToyCorpus(t, p->config.Out(Str(out_dir, "out dir")));
  });
}

lrtts_status lrtts_prep(lrtts_pipeline* p, const char* manifest, const char* out_dir, lrtts_prep_summary* summary) {
  return Guard([&] {
    NotNull(p, "pipeline");
    const auto r = lrtts::RunPrep(p->config, Str(manifest, "manifest"), Str(out_dir, "out dir"));
    if (summary != nullptr) {
      summary->segments = r.segments.size();
      summary->kept = r.kept.size();
      summary->dropped = r.dropped.size();
      summary->warnings = r.warnings.size();
      summary->input_utterances = lrtts::ReadManifest(manifest).size();
      double mx = 0.0;
      for (const auto& u : r.kept) mx = std::max(mx, u.duration_s);
      summary->max_duration_s = mx;
    }
  });
}

lrtts_status lrtts_vocab(lrtts_pipeline* p, const char* const* manifests, size_t n_manifests, const char* out_path,
                         int* vocab_size) {
  return Guard([&] {
    NotNull(p, "pipeline");
    lrtts::Require(n_manifests > 0, "vocab needs at least one manifest");
    NotNull(manifests, "manifests");
    std::vector<std::string> paths;
    for (size_t i = 0; i < n_manifests; ++i) paths.push_back(Str(manifests[i], "manifest"));
    const auto v = lrtts::RunVocab(p->config, paths, Str(out_path, "out path"));
    if (vocab_size != nullptr) *vocab_size = v.size();
  });
}

lrtts_status lrtts_features(lrtts_pipeline* p, const char* manifest, const char* out_dir, size_t* count) {
  return Guard([&] {
    NotNull(p, "pipeline");
    const size_t n = lrtts::RunFeatures(p->config, Str(manifest, "manifest"), Str(out_dir, "out dir"));
    if (count != nullptr) *count = n;
  });
}

void lrtts_train_options_init(lrtts_train_options* o) {
  if (o == nullptr) return;
  o->plan_path = nullptr;
  o->corpora = nullptr;
  o->n_corpora = 0;
  o->steps = -1;
  o->learning_rate = -1.0;
  o->final_learning_rate = -1.0;
  o->batch_size = 0;
  o->include_shdia = -1;
  o->segment_samples = -1;
  o->init_from = nullptr;
  o->has_seed = 0;
  o->seed = 0;
}

lrtts_status lrtts_train_am(lrtts_pipeline* p, const lrtts_train_options* o, const char* vocab_path,
                            const char* out_ckpt) {
  return Guard([&] {
    NotNull(p, "pipeline");
    const auto plan = MakePlan(p, o, "train_am", lrtts::Stage::kAverage);
    lrtts::RunTrainAm(p->config, plan, Str(vocab_path, "vocab path"), Str(out_ckpt, "out checkpoint"), p->log);
  });
}

lrtts_status lrtts_finetune_am(lrtts_pipeline* p, const lrtts_train_options* o, const char* out_ckpt) {
  return Guard([&] {
    NotNull(p, "pipeline");
    const auto plan = MakePlan(p, o, "finetune_am", lrtts::Stage::kFinetune);
    lrtts::RunFinetuneAm(p->config, plan, Str(out_ckpt, "out checkpoint"), p->log);
  });
}

lrtts_status lrtts_train_voc(lrtts_pipeline* p, const lrtts_train_options* o, const char* am_ckpt,
                             const char* out_ckpt) {
  return Guard([&] {
    NotNull(p, "pipeline");
    const auto plan = MakePlan(p, o, "train_voc", lrtts::Stage::kAverage);
    lrtts::RunTrainVoc(p->config, plan, Str(am_ckpt, "am checkpoint"), Str(out_ckpt, "out checkpoint"), p->log);
  });
}

lrtts_status lrtts_finetune_voc(lrtts_pipeline* p, const lrtts_train_options* o, const char* am_ckpt,
                                const char* out_ckpt) {
  return Guard([&] {
    NotNull(p, "pipeline");
    const auto plan = MakePlan(p, o, "finetune_voc", lrtts::Stage::kFinetune);
    lrtts::RunFinetuneVoc(p->config, plan, Str(am_ckpt, "am checkpoint"), Str(out_ckpt, "out checkpoint"), p->log);
  });
}

lrtts_status lrtts_synth_mel(lrtts_pipeline* p, const char* am_ckpt, const char* text, const char* lang,
                             const char* out_mel, int* frames, int* stopped_naturally) {
  return Guard([&] {
    NotNull(p, "pipeline");
    const auto am = lrtts::LoadAcoustic(Str(am_ckpt, "am checkpoint"));
    const auto s = lrtts::SynthesizeText(am, lrtts::SplitSyllables(Str(text, "text")),
                                         lrtts::ParseLang(Str(lang, "lang")));
    const std::string out = p->config.Out(Str(out_mel, "out mel"));
    lrtts::SaveMel(out, s.mel);
    lrtts::WriteAlignmentCsv(out + ".align.csv", s.alignments);
    if (frames != nullptr) *frames = static_cast<int>(s.mel.num_frames());
    if (stopped_naturally != nullptr) *stopped_naturally = s.stopped_naturally ? 1 : 0;
  });
}

void lrtts_waveform_options_init(lrtts_waveform_options* o) {
  if (o == nullptr) return;
  o->vocoder = LRTTS_VOCODER_GRIFFINLIM;
  o->vocoder_ckpt = nullptr;
  o->deterministic = 0;
  o->griffin_lim_iters = 60;
}

lrtts_status lrtts_tts(lrtts_pipeline* p, const char* am_ckpt, const char* text, const char* lang,
                       const lrtts_waveform_options* o, const char* out_wav, int* stopped_naturally) {
  return Guard([&] {
    NotNull(p, "pipeline");
    std::optional<lrtts::VocoderBundle> voc;
    const auto w = MakeWaveform(o, p->config.seed, voc);
    const auto s = lrtts::RunTts(p->config, Str(am_ckpt, "am checkpoint"), Str(text, "text"),
                                 lrtts::ParseLang(Str(lang, "lang")), w, Str(out_wav, "out wav"));
    if (stopped_naturally != nullptr) *stopped_naturally = s.stopped_naturally ? 1 : 0;
  });
}

lrtts_status lrtts_report(lrtts_pipeline* p, const char* manifest, const char* am_ckpt,
                          const lrtts_waveform_options* o, const char* out_dir, lrtts_report_summary* summary) {
  return Guard([&] {
    NotNull(p, "pipeline");
    std::optional<lrtts::VocoderBundle> voc;
    const auto w = MakeWaveform(o, p->config.seed, voc);
    const auto r = lrtts::RunReport(p->config, Str(manifest, "manifest"), Str(am_ckpt, "am checkpoint"), w,
                                    Str(out_dir, "out dir"));
    if (summary != nullptr) {
      const auto a = r.Aggregate();
      summary->utterances = a.at("utterances").get<size_t>();
      summary->failed = static_cast<size_t>(a.at("failed").get<long>());
      summary->stopped_naturally = static_cast<size_t>(a.at("stopped_naturally").get<long>());
      summary->mean_mcd_db = a.at("mean_mcd_db").get<double>();
      summary->mean_monotonicity = a.at("mean_monotonicity").get<double>();
      summary->mean_coverage = a.at("mean_coverage").get<double>();
    }
  });
}

lrtts_status lrtts_bench_voc(lrtts_pipeline* p, const char* voc_ckpt, double seconds, const char* out_csv,
                             double* samples_per_second, double* rtf) {
  return Guard([&] {
    NotNull(p, "pipeline");
    lrtts::Require(seconds > 0.0, "bench duration must be positive");
    const auto b = lrtts::RunBenchVoc(p->config, Str(voc_ckpt, "vocoder checkpoint"), seconds, Str(out_csv, "out csv"));
    if (samples_per_second != nullptr) *samples_per_second = b.samples_per_second;
    if (rtf != nullptr) *rtf = b.rtf;
  });
}

lrtts_status lrtts_acoustic_load(const char* path, lrtts_acoustic** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = nullptr;
    *out = new lrtts_acoustic{lrtts::LoadAcoustic(Str(path, "path"))};
  });
}

void lrtts_acoustic_free(lrtts_acoustic* am) { delete am; }

int lrtts_acoustic_vocab_size(const lrtts_acoustic* am) { return am == nullptr ? 0 : am->bundle.vocab.size(); }

lrtts_status lrtts_acoustic_synthesize(const lrtts_acoustic* am, const char* text, const char* lang,
                                       lrtts_mel** out, int* stopped_naturally) {
  return Guard([&] {
    NotNull(am, "acoustic model");
    NotNull(out, "out");
    *out = nullptr;
    auto s = lrtts::SynthesizeText(am->bundle, lrtts::SplitSyllables(Str(text, "text")),
                                   lrtts::ParseLang(Str(lang, "lang")));
    if (stopped_naturally != nullptr) *stopped_naturally = s.stopped_naturally ? 1 : 0;
    *out = new lrtts_mel{std::move(s.mel)};
  });
}

lrtts_status lrtts_mel_load(const char* path, lrtts_mel** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = nullptr;
    *out = new lrtts_mel{lrtts::LoadMel(Str(path, "path"))};
  });
}

void lrtts_mel_free(lrtts_mel* mel) { delete mel; }

int lrtts_mel_frames(const lrtts_mel* mel) { return mel == nullptr ? 0 : static_cast<int>(mel->mel.num_frames()); }

int lrtts_mel_channels(const lrtts_mel* mel) { return mel == nullptr ? 0 : static_cast<int>(mel->mel.num_mels()); }

lrtts_status lrtts_mel_copy(const lrtts_mel* mel, float* dst, size_t cap) {
  return Guard([&] {
    NotNull(mel, "mel");
    NotNull(dst, "dst");
    const auto& f = mel->mel.frames;
    lrtts::Require(cap >= static_cast<size_t>(f.size()), "destination buffer too small");
    for (lrtts::Index i = 0; i < f.size(); ++i) dst[i] = static_cast<float>(f.data()[i]);
  });
}

lrtts_status lrtts_vocoder_load(const char* path, lrtts_vocoder** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = nullptr;
    *out = new lrtts_vocoder{lrtts::LoadVocoder(Str(path, "path"))};
  });
}

void lrtts_vocoder_free(lrtts_vocoder* v) { delete v; }

int lrtts_vocoder_receptive_field(const lrtts_vocoder* v) {
  return v == nullptr ? 0 : lrtts::ReceptiveField(v->bundle.model.config());
}

size_t lrtts_vocoder_output_length(const lrtts_vocoder* v, const lrtts_mel* mel) {
  if (v == nullptr || mel == nullptr) return 0;
  return static_cast<size_t>(mel->mel.num_frames()) * static_cast<size_t>(v->bundle.audio.hop);
}

lrtts_status lrtts_vocoder_generate(const lrtts_vocoder* v, const lrtts_mel* mel, uint64_t seed, int deterministic,
                                    int16_t* out, size_t cap, size_t* written) {
  return Guard([&] {
    NotNull(v, "vocoder");
    NotNull(mel, "mel");
    NotNull(out, "out");
    const size_t need = lrtts_vocoder_output_length(v, mel);
    lrtts::Require(cap >= need, "output buffer too small: need " + std::to_string(need));
    lrtts::Rng rng(seed);
    lrtts::GenerateOptions g;
    g.deterministic = deterministic != 0;
    const auto r =
        v->bundle.model.GenerateIncremental(lrtts::UpsampleConditioning(mel->mel, v->bundle.audio.hop), rng, g);
    for (size_t i = 0; i < r.codes.size(); ++i) out[i] = r.codes[i];
    if (written != nullptr) *written = r.codes.size();
  });
}

}  // extern "C"
