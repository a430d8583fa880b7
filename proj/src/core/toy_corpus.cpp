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
#include "toy_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "audio.hpp"
#include "frontend.hpp"

namespace lrtts {

namespace {

const std::vector<std::string> kInitials = {"b", "d", "g", "m", "n", "s", "z"};
const std::vector<std::string> kFinals = {"a", "e", "i", "o", "u", "ai", "ei", "ao", "ou", "an", "en", "in", "un", "ang", "ong", "ing"};

int SymbolIndex(const std::string& symbol) {
  const auto& syms = ToySymbols();
  const auto it = std::find(syms.begin(), syms.end(), symbol);
  if (it == syms.end()) Fail(ErrorKind::kInvalidArgument, "toy corpus has no token '" + symbol + "'");
  return static_cast<int>(it - syms.begin());
}

}  // namespace

const std::vector<std::string>& ToySymbols() {
  static const std::vector<std::string> symbols = {"a", "b", "d", "e", "g", "i", "m", "n",
                                                   "o", "s", "u", "z", "<t1>", "<t2>", "<t3>", "<t4>"};
  return symbols;
}

int ToyTokenMelBin(Lang lang, const std::string& symbol) {
  Require(lang == Lang::kMand || lang == Lang::kShdia, "toy corpus: language must be mand or shdia");
  const int base = lang == Lang::kMand ? 8 : 44;
  return base + 2 * SymbolIndex(symbol);
}

double ToyTokenFrequency(Lang lang, const std::string& symbol, const AudioConfig& config) {
  const int bin = ToyTokenMelBin(lang, symbol);
  const auto centres = MelCenterFrequencies(config);
  Require(bin < static_cast<int>(centres.size()), "toy corpus: mel config has too few bins");
  return centres[static_cast<size_t>(bin)];
}

std::vector<std::string> RandomToySyllables(Rng& rng, int count) {
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::string s;
    if (rng.Uniform() < 0.8) s += kInitials[rng.Below(kInitials.size())];
    s += kFinals[rng.Below(kFinals.size())];
    s += static_cast<char>('1' + rng.Below(4));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> RenderToyUtterance(const std::vector<std::string>& syllables, Lang lang,
                                       const ToyCorpusOptions& options, const AudioConfig& config) {
  const int sr = config.sample_rate;
  const auto burst = static_cast<size_t>(std::lround(options.token_s * sr));
  const auto pad = static_cast<size_t>(std::lround(options.pad_s * sr));
  const auto ramp = std::min<size_t>(burst / 2, static_cast<size_t>(sr / 200));  // 5 ms
  std::vector<double> out(pad, 0.0);
  for (const auto& syl : syllables) {
    for (const auto& sym : SyllableToLetters(syl)) {
      const double f = ToyTokenFrequency(lang, sym, config);
      for (size_t n = 0; n < burst; ++n) {
        double gain = 1.0;
        if (n < ramp) gain = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(n) / ramp);
        if (n >= burst - ramp) gain = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(burst - 1 - n) / ramp);
        out.push_back(options.amplitude * gain * std::sin(2.0 * M_PI * f * static_cast<double>(n) / sr));
      }
    }
  }
  out.insert(out.end(), pad, 0.0);
  return out;
}

Manifest GenerateToyCorpus(const ToyCorpusOptions& options, const std::string& out_dir) {
  Require(options.n_utts >= 1, "gen-toycorpus: n_utts must be at least 1");
  Require(options.mand_fraction >= 0.0 && options.mand_fraction <= 1.0, "gen-toycorpus: lang mix must lie in [0, 1]");
  Require(options.min_syllables >= 1 && options.max_syllables >= options.min_syllables,
          "gen-toycorpus: invalid syllable count range");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wavs");
  Rng rng(options.seed);
  const int n_mand = static_cast<int>(std::lround(options.mand_fraction * options.n_utts));
  Manifest manifest;
  for (int u = 0; u < options.n_utts; ++u) {
    const Lang lang = u < n_mand ? Lang::kMand : Lang::kShdia;
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%s_%04d", options.id_prefix.c_str(), LangName(lang).c_str(), u);
    Utterance utt;
    utt.id = id;
    utt.lang = lang;
    std::vector<double> audio;
    if (!options.long_form) {
      const int n = options.min_syllables + static_cast<int>(rng.Below(options.max_syllables - options.min_syllables + 1));
      utt.syllables = RandomToySyllables(rng, n);
      audio = RenderToyUtterance(utt.syllables, lang, options);
    } else {
      ToyCorpusOptions phrase_opts = options;
      phrase_opts.pad_s = 0.0;
      audio.assign(static_cast<size_t>(options.pad_s * kSampleRate), 0.0);
      const int phrases = 2 + static_cast<int>(rng.Below(3));
      for (int p = 0; p < phrases; ++p) {
        // Roughly one phrase in four runs past 7 s with no pause inside.
        const bool long_phrase = rng.Uniform() < 0.25;
        const int n = long_phrase ? 18 + static_cast<int>(rng.Below(6)) : 3 + static_cast<int>(rng.Below(10));
        auto syl = RandomToySyllables(rng, n);
        const auto piece = RenderToyUtterance(syl, lang, phrase_opts);
        audio.insert(audio.end(), piece.begin(), piece.end());
        utt.syllables.insert(utt.syllables.end(), syl.begin(), syl.end());
        const double gap = p + 1 < phrases ? rng.Uniform(0.4, 1.0) : options.pad_s;
        audio.insert(audio.end(), static_cast<size_t>(gap * kSampleRate), 0.0);
      }
    }
    utt.wav_path = (fs::path(out_dir) / "wavs" / (utt.id + ".wav")).string();
    utt.duration_s = static_cast<double>(audio.size()) / kSampleRate;
    SaveWav(utt.wav_path, audio);
    manifest.push_back(std::move(utt));
  }
  WriteManifest((fs::path(out_dir) / "manifest.jsonl").string(), manifest);
  return manifest;
}

}  // namespace lrtts
