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

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "manifest.hpp"

namespace lrtts {

struct LetterToken {
  Lang lang = Lang::kShared;
  std::string symbol;

  auto operator<=>(const LetterToken&) const = default;
  std::string ToString() const;  // "lang:symbol"
  static LetterToken Parse(const std::string& text);
};

struct FrontendOptions {
  // Off reproduces the shared phone set: every language is encoded as mand.
  bool lang_tags = true;
  bool insert_pauses = false;

  Lang TokenLang(Lang utterance_lang) const { return lang_tags ? utterance_lang : Lang::kMand; }
};

// "zhong1" -> z h o n g <t1>. Accepts [a-z]+[0-5]?.
std::vector<std::string> SyllableToLetters(const std::string& syllable);
std::vector<LetterToken> TagLanguage(const std::vector<std::string>& symbols, Lang lang);
bool IsSpecialSymbol(const std::string& symbol);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSp = 3;
  static constexpr int kNumSpecials = 4;

  Vocabulary();  // specials only
  // Specials first, then every observed tagged token in (lang, symbol) order.
  static Vocabulary Build(const Manifest& manifest, const FrontendOptions& options = {});
  static Vocabulary FromTokens(const std::vector<LetterToken>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  std::optional<int> Find(const LetterToken& token) const;
  int Id(const LetterToken& token) const;  // throws kOutOfVocabulary
  const LetterToken& Token(int id) const;
  const std::vector<LetterToken>& tokens() const { return tokens_; }
  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

  // One "lang:symbol" per line; line number is the id.
  void Save(const std::string& path) const;
  static Vocabulary Load(const std::string& path);

 private:
  std::vector<LetterToken> tokens_;
  std::map<LetterToken, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;
  Lang lang = Lang::kMand;
};

// [BOS] + per-syllable tokens (SP between syllables when asked) + [EOS].
// Unknown tokens are an error listing every missing token.
TokenSequence EncodeTranscript(const std::vector<std::string>& syllables, Lang lang, const Vocabulary& vocab,
                               bool insert_pauses);
// Regroups tokens into syllables at tone and SP boundaries.
std::vector<std::string> DecodeTokens(const TokenSequence& seq, const Vocabulary& vocab);
// Letter-token count used by the rate filter.
size_t CountLetterTokens(const std::vector<std::string>& syllables);

}  // namespace lrtts
