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
#ifndef LOWRES_TTS_LOWRES_TTS_H_
#define LOWRES_TTS_LOWRES_TTS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LRTTS_API __declspec(dllexport)
#else
#define LRTTS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lrtts_status {
  LRTTS_OK = 0,
  LRTTS_INVALID_ARGUMENT = 1,
  LRTTS_IO_ERROR = 2,
  LRTTS_CORRUPT = 3,
  LRTTS_VERSION_MISMATCH = 4,
  LRTTS_SHAPE_MISMATCH = 5,
  LRTTS_KIND_MISMATCH = 6,
  LRTTS_OUT_OF_VOCABULARY = 7,
  LRTTS_NUMERIC = 8,
  LRTTS_INTERNAL = 9
} lrtts_status;

typedef enum lrtts_vocoder_kind { LRTTS_VOCODER_GRIFFINLIM = 0, LRTTS_VOCODER_WAVENET = 1 } lrtts_vocoder_kind;

LRTTS_API const char* lrtts_version(void);
LRTTS_API const char* lrtts_status_name(lrtts_status status);
/* Message of the last failed call on this thread ("" if none). */
LRTTS_API const char* lrtts_last_error(void);

typedef void (*lrtts_log_fn)(const char* line, void* user);

/* ---- pipeline: the command surface ---- */

typedef struct lrtts_pipeline lrtts_pipeline;

/* config_path may be NULL for defaults. The work dir defaults to the
   LOWRES_TTS_WORKDIR environment variable when set, else the config value. */
LRTTS_API lrtts_status lrtts_pipeline_create(const char* config_path, lrtts_pipeline** out);
LRTTS_API void lrtts_pipeline_destroy(lrtts_pipeline* p);
LRTTS_API lrtts_status lrtts_pipeline_set_work_dir(lrtts_pipeline* p, const char* dir);
LRTTS_API lrtts_status lrtts_pipeline_set_seed(lrtts_pipeline* p, uint64_t seed);
LRTTS_API lrtts_status lrtts_pipeline_set_jobs(lrtts_pipeline* p, int jobs);
LRTTS_API lrtts_status lrtts_pipeline_set_frontend(lrtts_pipeline* p, int lang_tags, int insert_pauses);
LRTTS_API lrtts_status lrtts_pipeline_set_log(lrtts_pipeline* p, lrtts_log_fn fn, void* user);
/* Writes the effective configuration as JSON. */
LRTTS_API lrtts_status lrtts_pipeline_save_config(const lrtts_pipeline* p, const char* path);

typedef struct lrtts_toy_options {
  int n_utts;
  double mand_fraction;
  int min_syllables;
  int max_syllables;
  int long_form;
  double amplitude;
  const char* id_prefix;
} lrtts_toy_options;

LRTTS_API void lrtts_toy_options_init(lrtts_toy_options* o);
LRTTS_API lrtts_status lrtts_gen_toycorpus(lrtts_pipeline* p, const lrtts_toy_options* o, const char* out_dir);

typedef struct lrtts_prep_summary {
  size_t input_utterances;
  size_t segments;
  size_t kept;
  size_t dropped;
  size_t warnings;
  double max_duration_s;
} lrtts_prep_summary;

LRTTS_API lrtts_status lrtts_prep(lrtts_pipeline* p, const char* manifest, const char* out_dir,
                                  lrtts_prep_summary* summary);
LRTTS_API lrtts_status lrtts_vocab(lrtts_pipeline* p, const char* const* manifests, size_t n_manifests,
                                   const char* out_path, int* vocab_size);
LRTTS_API lrtts_status lrtts_features(lrtts_pipeline* p, const char* manifest, const char* out_dir, size_t* count);

/* Fields left at their init values fall back to the pipeline config plan. */
typedef struct lrtts_train_options {
  const char* plan_path; /* TrainPlan JSON; NULL to start from the config */
  const char* const* corpora;
  size_t n_corpora;
  int steps;               /* < 0: keep */
  double learning_rate;    /* < 0: keep */
  double final_learning_rate; /* < 0: keep; > 0: exponential decay target */
  int batch_size;          /* <= 0: keep */
  int include_shdia;       /* < 0: keep */
  int segment_samples;     /* < 0: keep */
  const char* init_from;   /* NULL: keep */
  int has_seed;
  uint64_t seed;
} lrtts_train_options;

LRTTS_API void lrtts_train_options_init(lrtts_train_options* o);
LRTTS_API lrtts_status lrtts_train_am(lrtts_pipeline* p, const lrtts_train_options* o, const char* vocab_path,
                                      const char* out_ckpt);
LRTTS_API lrtts_status lrtts_finetune_am(lrtts_pipeline* p, const lrtts_train_options* o, const char* out_ckpt);
LRTTS_API lrtts_status lrtts_train_voc(lrtts_pipeline* p, const lrtts_train_options* o, const char* am_ckpt,
                                       const char* out_ckpt);
LRTTS_API lrtts_status lrtts_finetune_voc(lrtts_pipeline* p, const lrtts_train_options* o, const char* am_ckpt,
                                          const char* out_ckpt);

/* text: space-separated syllables such as "ba1 da4"; lang: "mand" or "shdia". */
LRTTS_API lrtts_status lrtts_synth_mel(lrtts_pipeline* p, const char* am_ckpt, const char* text, const char* lang,
                                       const char* out_mel, int* frames, int* stopped_naturally);

typedef struct lrtts_waveform_options {
  lrtts_vocoder_kind vocoder;
  const char* vocoder_ckpt; /* required for LRTTS_VOCODER_WAVENET */
  int deterministic;
  int griffin_lim_iters;
} lrtts_waveform_options;

LRTTS_API void lrtts_waveform_options_init(lrtts_waveform_options* o);
LRTTS_API lrtts_status lrtts_tts(lrtts_pipeline* p, const char* am_ckpt, const char* text, const char* lang,
                                 const lrtts_waveform_options* o, const char* out_wav, int* stopped_naturally);

typedef struct lrtts_report_summary {
  size_t utterances;
  size_t failed;
  size_t stopped_naturally;
  double mean_mcd_db;
  double mean_monotonicity;
  double mean_coverage;
} lrtts_report_summary;

LRTTS_API lrtts_status lrtts_report(lrtts_pipeline* p, const char* manifest, const char* am_ckpt,
                                    const lrtts_waveform_options* o, const char* out_dir,
                                    lrtts_report_summary* summary);
LRTTS_API lrtts_status lrtts_bench_voc(lrtts_pipeline* p, const char* voc_ckpt, double seconds, const char* out_csv,
                                       double* samples_per_second, double* rtf);

/* ---- models ---- */

typedef struct lrtts_acoustic lrtts_acoustic;
typedef struct lrtts_vocoder lrtts_vocoder;
typedef struct lrtts_mel lrtts_mel;

LRTTS_API lrtts_status lrtts_acoustic_load(const char* path, lrtts_acoustic** out);
LRTTS_API void lrtts_acoustic_free(lrtts_acoustic* am);
LRTTS_API int lrtts_acoustic_vocab_size(const lrtts_acoustic* am);
LRTTS_API lrtts_status lrtts_acoustic_synthesize(const lrtts_acoustic* am, const char* text, const char* lang,
                                                 lrtts_mel** out, int* stopped_naturally);

LRTTS_API lrtts_status lrtts_mel_load(const char* path, lrtts_mel** out);
LRTTS_API void lrtts_mel_free(lrtts_mel* mel);
LRTTS_API int lrtts_mel_frames(const lrtts_mel* mel);
LRTTS_API int lrtts_mel_channels(const lrtts_mel* mel);
/* Copies frames * channels values row-major; cap is in elements and a
   smaller buffer is an INVALID_ARGUMENT. */
LRTTS_API lrtts_status lrtts_mel_copy(const lrtts_mel* mel, float* dst, size_t cap);

LRTTS_API lrtts_status lrtts_vocoder_load(const char* path, lrtts_vocoder** out);
LRTTS_API void lrtts_vocoder_free(lrtts_vocoder* v);
LRTTS_API int lrtts_vocoder_receptive_field(const lrtts_vocoder* v);
/* Samples produced for a mel: frames * hop. */
LRTTS_API size_t lrtts_vocoder_output_length(const lrtts_vocoder* v, const lrtts_mel* mel);
LRTTS_API lrtts_status lrtts_vocoder_generate(const lrtts_vocoder* v, const lrtts_mel* mel, uint64_t seed,
                                              int deterministic, int16_t* out, size_t cap, size_t* written);

#ifdef __cplusplus
}
#endif

#endif  // LOWRES_TTS_LOWRES_TTS_H_
