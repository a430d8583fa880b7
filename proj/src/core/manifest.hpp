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

#include <string>
#include <vector>

#include "common.hpp"

namespace lrtts {

enum class Lang { kMand, kShdia, kShared };

std::string LangName(Lang lang);
Lang ParseLang(const std::string& name);

struct Utterance {
  std::string id;
  std::string wav_path;
  Lang lang = Lang::kMand;
  std::vector<std::string> syllables;
  double duration_s = 0.0;
  // Transcript was split across segments proportionally, not verified.
  bool approximate = false;
};

using Manifest = std::vector<Utterance>;

std::vector<std::string> SplitSyllables(const std::string& text);
std::string JoinSyllables(const std::vector<std::string>& syllables);

// JSON lines with keys id, wav, lang, syllables, dur (+ approximate when set).
// Relative wav paths are resolved against the manifest's directory on read
// and written relative to it when possible.
Manifest ReadManifest(const std::string& path);
void WriteManifest(const std::string& path, const Manifest& manifest);

}  // namespace lrtts
