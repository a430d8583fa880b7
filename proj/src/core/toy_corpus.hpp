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

#include <cstdint>
#include <string>
#include <vector>

#include "features.hpp"
#include "manifest.hpp"

namespace lrtts {

// Synthetic two-language corpus. Every (lang, symbol) letter token is a
// 100 ms tone burst at the centre frequency of its own mel bin; the two
// languages use disjoint bin banks so they behave like two speakers.
struct ToyCorpusOptions {
  int n_utts = 10;
  double mand_fraction = 1.0;  // share of utterances in mand, the rest shdia
  uint64_t seed = 0;
  int min_syllables = 1;
  int max_syllables = 3;
  double token_s = 0.1;
  double pad_s = 0.05;  // silence before and after each utterance
  double amplitude = 0.3;
  // Long-form recordings: phrases separated by 0.4-1.0 s pauses, some
  // phrases longer than 7 s, for exercising re-segmentation.
  bool long_form = false;
  std::string id_prefix = "toy";
};

// Letters and tone tokens the generator draws from.
const std::vector<std::string>& ToySymbols();
// Frequency assigned to a token; throws for symbols outside ToySymbols().
double ToyTokenFrequency(Lang lang, const std::string& symbol, const AudioConfig& config = {});
// Mel bin whose centre the token's tone sits on.
int ToyTokenMelBin(Lang lang, const std::string& symbol);

std::vector<std::string> RandomToySyllables(Rng& rng, int count);
std::vector<double> RenderToyUtterance(const std::vector<std::string>& syllables, Lang lang,
                                       const ToyCorpusOptions& options, const AudioConfig& config = {});

// Writes <out_dir>/wavs/<id>.wav and <out_dir>/manifest.jsonl.
Manifest GenerateToyCorpus(const ToyCorpusOptions& options, const std::string& out_dir);

}  // namespace lrtts
