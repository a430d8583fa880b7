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
// lowres-tts: command-line front end. Talks to the library only through the
// C API.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lowres_tts/lowres_tts.h"

namespace {

struct Globals {
  std::string config;
  std::string work_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  bool jobs_set = false;
  bool no_lang_tags = false;
  bool pauses = false;
  bool quiet = false;
};

struct TrainArgs {
  std::string plan;
  std::vector<std::string> corpora;
  int steps = -1;
  double lr = -1.0;
  double final_lr = -1.0;
  int batch = 0;
  bool include_shdia = false;
  int segment = -1;
  std::string init_from;
};

struct WaveArgs {
  std::string vocoder = "griffinlim";
  std::string voc_ckpt;
  bool deterministic = false;
  int gl_iters = 60;
};

void Log(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

int Report(lrtts_status s) {
  if (s == LRTTS_OK) return 0;
  std::fprintf(stderr, "error (%s): %s\n", lrtts_status_name(s), lrtts_last_error());
  return s == LRTTS_INTERNAL ? 2 : 1;
}

void AddTrainFlags(CLI::App* sub, TrainArgs& t) {
  sub->add_option("--plan", t.plan, "TrainPlan JSON");
  sub->add_option("--corpus", t.corpora, "Manifest to train on (repeatable)");
  sub->add_option("--steps", t.steps, "Optimizer steps");
  sub->add_option("--lr", t.lr, "Learning rate");
  sub->add_option("--final-lr", t.final_lr, "Decay the learning rate exponentially to this value");
  sub->add_option("--batch-size", t.batch, "Utterances per step");
  sub->add_option("--segment-samples", t.segment, "Vocoder crop length, 0 = whole utterance");
  sub->add_option("--init-from", t.init_from, "Checkpoint to start from");
}

lrtts_train_options TrainOptions(const TrainArgs& t, std::vector<const char*>& storage, const Globals& g) {
  lrtts_train_options o;
  lrtts_train_options_init(&o);
  storage.clear();
  for (const auto& c : t.corpora) storage.push_back(c.c_str());
  o.plan_path = t.plan.empty() ? nullptr : t.plan.c_str();
  o.corpora = storage.data();
  o.n_corpora = storage.size();
  o.steps = t.steps;
  o.learning_rate = t.lr;
  o.final_learning_rate = t.final_lr;
  o.batch_size = t.batch;
  o.include_shdia = t.include_shdia ? 1 : -1;
  o.segment_samples = t.segment;
  o.init_from = t.init_from.empty() ? nullptr : t.init_from.c_str();
  o.has_seed = g.seed_set ? 1 : 0;
  o.seed = g.seed;
  return o;
}

void AddWaveFlags(CLI::App* sub, WaveArgs& w) {
  sub->add_option("--vocoder", w.vocoder, "wavenet or griffinlim")
      ->check(CLI::IsMember({"wavenet", "griffinlim"}));
  sub->add_option("--voc-ckpt", w.voc_ckpt, "Vocoder checkpoint (wavenet)");
  sub->add_flag("--deterministic", w.deterministic, "Mixture mode instead of sampling");
  sub->add_option("--gl-iters", w.gl_iters, "Griffin-Lim iterations");
}

lrtts_waveform_options WaveOptions(const WaveArgs& w) {
  lrtts_waveform_options o;
  lrtts_waveform_options_init(&o);
  o.vocoder = w.vocoder == "wavenet" ? LRTTS_VOCODER_WAVENET : LRTTS_VOCODER_GRIFFINLIM;
  o.vocoder_ckpt = w.voc_ckpt.empty() ? nullptr : w.voc_ckpt.c_str();
  o.deterministic = w.deterministic ? 1 : 0;
  o.griffin_lim_iters = w.gl_iters;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-resource text-to-speech toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "PipelineConfig JSON")->check(CLI::ExistingFile);
  app.add_option("--work-dir", g.work_dir, "Output root (default: $LOWRES_TTS_WORKDIR or config)");
  app.add_option("--seed", g.seed, "Seed for all randomness")->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->each([&](const std::string&) {
    g.jobs_set = true;
  });
  app.add_flag("--no-lang-tags", g.no_lang_tags, "Shared phone set: encode every language as mand");
  app.add_flag("--pauses", g.pauses, "Insert pause tokens between syllables");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  // gen-toycorpus
  auto* gen = app.add_subcommand("gen-toycorpus", "Generate the synthetic two-language corpus");
  int gen_n = 10;
  double gen_mand = 1.0;
  int gen_min = 1, gen_max = 3;
  bool gen_long = false;
  double gen_amp = 0.3;
  std::string gen_prefix = "toy", gen_out;
  gen->add_option("--n-utts", gen_n, "Utterance count")->check(CLI::PositiveNumber);
  gen->add_option("--mand-fraction", gen_mand, "Share of mand utterances")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--min-syllables", gen_min, "Minimum syllables per utterance");
  gen->add_option("--max-syllables", gen_max, "Maximum syllables per utterance");
  gen->add_flag("--long-form", gen_long, "Multi-phrase recordings with long phrases");
  gen->add_option("--amplitude", gen_amp, "Tone amplitude");
  gen->add_option("--prefix", gen_prefix, "Utterance id prefix");
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* prep = app.add_subcommand("prep", "Segment, filter and histogram a corpus");
  std::string prep_in, prep_out;
  prep->add_option("--manifest", prep_in, "Input manifest")->required();
  prep->add_option("--out", prep_out, "Output directory")->required();

  auto* vocab = app.add_subcommand("vocab", "Build the token vocabulary");
  std::vector<std::string> vocab_in;
  std::string vocab_out;
  vocab->add_option("--manifest", vocab_in, "Manifest (repeatable)")->required();
  vocab->add_option("--out", vocab_out, "Vocabulary file")->required();

  auto* feats = app.add_subcommand("features", "Extract log-mel features");
  std::string feats_in, feats_out;
  feats->add_option("--manifest", feats_in, "Manifest")->required();
  feats->add_option("--out", feats_out, "Output directory")->required();

  auto* tam = app.add_subcommand("train-am", "Average-stage acoustic model training");
  TrainArgs tam_args;
  std::string tam_vocab, tam_out;
  AddTrainFlags(tam, tam_args);
  tam->add_flag("--include-shdia", tam_args.include_shdia, "Keep shdia utterances in average training");
  tam->add_option("--vocab", tam_vocab, "Vocabulary file")->required();
  tam->add_option("--out", tam_out, "Output checkpoint")->required();

  auto* fam = app.add_subcommand("finetune-am", "Fine-tune an acoustic model on the target speaker");
  TrainArgs fam_args;
  std::string fam_out;
  AddTrainFlags(fam, fam_args);
  fam->add_option("--out", fam_out, "Output checkpoint")->required();

  auto* smel = app.add_subcommand("synth-mel", "Text to mel spectrogram");
  std::string smel_am, smel_text, smel_lang = "mand", smel_out;
  smel->add_option("--am", smel_am, "Acoustic checkpoint")->required();
  smel->add_option("--text", smel_text, "Syllables, e.g. \"ba1 da4\"")->required();
  smel->add_option("--lang", smel_lang, "mand or shdia");
  smel->add_option("--out", smel_out, "Output .mel")->required();

  auto* tvoc = app.add_subcommand("train-voc", "Average-stage vocoder training");
  TrainArgs tvoc_args;
  std::string tvoc_am, tvoc_out;
  AddTrainFlags(tvoc, tvoc_args);
  tvoc->add_flag("--include-shdia", tvoc_args.include_shdia, "Keep shdia utterances in average training");
  tvoc->add_option("--am", tvoc_am, "Acoustic checkpoint providing the conditioning")->required();
  tvoc->add_option("--out", tvoc_out, "Output checkpoint")->required();

  auto* fvoc = app.add_subcommand("finetune-voc", "Fine-tune a vocoder on the target speaker");
  TrainArgs fvoc_args;
  std::string fvoc_am, fvoc_out;
  AddTrainFlags(fvoc, fvoc_args);
  fvoc->add_option("--am", fvoc_am, "Fine-tuned acoustic checkpoint")->required();
  fvoc->add_option("--out", fvoc_out, "Output checkpoint")->required();

  auto* tts = app.add_subcommand("tts", "Text to WAV");
  std::string tts_am, tts_text, tts_lang = "mand", tts_out;
  WaveArgs tts_wave;
  tts->add_option("--am", tts_am, "Acoustic checkpoint")->required();
  tts->add_option("--text", tts_text, "Syllables, e.g. \"ba1 da4\"")->required();
  tts->add_option("--lang", tts_lang, "mand or shdia");
  tts->add_option("--out", tts_out, "Output WAV")->required();
  AddWaveFlags(tts, tts_wave);

  auto* rep = app.add_subcommand("report", "Synthesize a manifest and score it");
  std::string rep_manifest, rep_am, rep_out;
  WaveArgs rep_wave;
  rep->add_option("--manifest", rep_manifest, "Evaluation manifest")->required();
  rep->add_option("--am", rep_am, "Acoustic checkpoint")->required();
  rep->add_option("--out", rep_out, "Output directory")->required();
  AddWaveFlags(rep, rep_wave);

  auto* bench = app.add_subcommand("bench-voc", "Time incremental vocoder generation");
  std::string bench_ckpt, bench_out = "bench_voc.csv";
  double bench_s = 1.0;
  bench->add_option("--voc-ckpt", bench_ckpt, "Vocoder checkpoint")->required();
  bench->add_option("--seconds", bench_s, "Audio length to generate");
  bench->add_option("--out", bench_out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::fprintf(stderr, "%s", app.help().c_str());
    return 1;
  }

  lrtts_pipeline* p = nullptr;
  if (int rc = Report(lrtts_pipeline_create(g.config.empty() ? nullptr : g.config.c_str(), &p)); rc != 0) return rc;
  struct Closer {
    lrtts_pipeline* p;
    ~Closer() { lrtts_pipeline_destroy(p); }
  } closer{p};

  if (!g.work_dir.empty()) lrtts_pipeline_set_work_dir(p, g.work_dir.c_str());
  if (g.seed_set) lrtts_pipeline_set_seed(p, g.seed);
  if (g.jobs_set) lrtts_pipeline_set_jobs(p, g.jobs);
  if (g.no_lang_tags || g.pauses) lrtts_pipeline_set_frontend(p, g.no_lang_tags ? 0 : 1, g.pauses ? 1 : 0);
  if (!g.quiet) lrtts_pipeline_set_log(p, Log, nullptr);

  std::vector<const char*> storage;
  if (*gen) {
    lrtts_toy_options o;
    lrtts_toy_options_init(&o);
    o.n_utts = gen_n;
    o.mand_fraction = gen_mand;
    o.min_syllables = gen_min;
    o.max_syllables = gen_max;
    o.long_form = gen_long ? 1 : 0;
    o.amplitude = gen_amp;
    o.id_prefix = gen_prefix.c_str();
    return Report(lrtts_gen_toycorpus(p, &o, gen_out.c_str()));
  }
  if (*prep) {
    lrtts_prep_summary s{};
    const int rc = Report(lrtts_prep(p, prep_in.c_str(), prep_out.c_str(), &s));
    if (rc == 0 && !g.quiet) {
      std::printf("segments %zu kept %zu dropped %zu warnings %zu max_duration_s %.3f\n", s.segments, s.kept,
                  s.dropped, s.warnings, s.max_duration_s);
    }
    return rc;
  }
  if (*vocab) {
    for (const auto& m : vocab_in) storage.push_back(m.c_str());
    int n = 0;
    const int rc = Report(lrtts_vocab(p, storage.data(), storage.size(), vocab_out.c_str(), &n));
    if (rc == 0 && !g.quiet) std::printf("vocab size %d\n", n);
    return rc;
  }
  if (*feats) {
    size_t n = 0;
    const int rc = Report(lrtts_features(p, feats_in.c_str(), feats_out.c_str(), &n));
    if (rc == 0 && !g.quiet) std::printf("features %zu\n", n);
    return rc;
  }
  if (*tam) {
    const auto o = TrainOptions(tam_args, storage, g);
    return Report(lrtts_train_am(p, &o, tam_vocab.c_str(), tam_out.c_str()));
  }
  if (*fam) {
    const auto o = TrainOptions(fam_args, storage, g);
    return Report(lrtts_finetune_am(p, &o, fam_out.c_str()));
  }
  if (*smel) {
    int frames = 0, stopped = 0;
    const int rc =
        Report(lrtts_synth_mel(p, smel_am.c_str(), smel_text.c_str(), smel_lang.c_str(), smel_out.c_str(), &frames,
                               &stopped));
    if (rc == 0 && !g.quiet) std::printf("frames %d stopped_naturally %d\n", frames, stopped);
    return rc;
  }
  if (*tvoc) {
    const auto o = TrainOptions(tvoc_args, storage, g);
    return Report(lrtts_train_voc(p, &o, tvoc_am.c_str(), tvoc_out.c_str()));
  }
  if (*fvoc) {
    const auto o = TrainOptions(fvoc_args, storage, g);
    return Report(lrtts_finetune_voc(p, &o, fvoc_am.c_str(), fvoc_out.c_str()));
  }
  if (*tts) {
    const auto o = WaveOptions(tts_wave);
    int stopped = 0;
    const int rc =
        Report(lrtts_tts(p, tts_am.c_str(), tts_text.c_str(), tts_lang.c_str(), &o, tts_out.c_str(), &stopped));
    if (rc == 0 && !g.quiet && !stopped) std::fprintf(stderr, "warning: decoder hit the step cap\n");
    return rc;
  }
  if (*rep) {
    const auto o = WaveOptions(rep_wave);
    lrtts_report_summary s{};
    const int rc = Report(lrtts_report(p, rep_manifest.c_str(), rep_am.c_str(), &o, rep_out.c_str(), &s));
    if (rc == 0 && !g.quiet) {
      std::printf("utterances %zu failed %zu stopped %zu mcd_db %.3f monotonicity %.3f coverage %.3f\n", s.utterances,
                  s.failed, s.stopped_naturally, s.mean_mcd_db, s.mean_monotonicity, s.mean_coverage);
    }
    return rc;
  }
  if (*bench) {
    double sps = 0.0, rtf = 0.0;
    const int rc = Report(lrtts_bench_voc(p, bench_ckpt.c_str(), bench_s, bench_out.c_str(), &sps, &rtf));
    if (rc == 0 && !g.quiet) std::printf("samples_per_second %.1f rtf %.3f\n", sps, rtf);
    return rc;
  }
  return 1;
}
