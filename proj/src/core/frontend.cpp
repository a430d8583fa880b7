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
#include "frontend.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace lrtts {

namespace {

const char* const kSpecialNames[Vocabulary::kNumSpecials] = {"PAD", "BOS", "EOS", "SP"};

bool IsToneToken(const std::string& s) {
  return s.size() == 4 && s[0] == '<' && s[1] == 't' && s[2] >= '0' && s[2] <= '5' && s[3] == '>';
}

}  // namespace

std::string LetterToken::ToString() const { return LangName(lang) + ":" + symbol; }

LetterToken LetterToken::Parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon + 1 >= text.size()) {
    Fail(ErrorKind::kCorrupt, "malformed vocabulary entry '" + text + "' (expected lang:symbol)");
  }
  return {ParseLang(text.substr(0, colon)), text.substr(colon + 1)};
}

bool IsSpecialSymbol(const std::string& symbol) {
  return std::find(std::begin(kSpecialNames), std::end(kSpecialNames), symbol) != std::end(kSpecialNames);
}

std::vector<std::string> SyllableToLetters(const std::string& syllable) {
  size_t letters = 0;
  while (letters < syllable.size() && syllable[letters] >= 'a' && syllable[letters] <= 'z') ++letters;
  const bool ok = letters > 0 && (letters == syllable.size() ||
                                  (letters + 1 == syllable.size() && syllable[letters] >= '0' && syllable[letters] <= '5'));
  if (!ok) Fail(ErrorKind::kInvalidArgument, "malformed syllable '" + syllable + "' (expected [a-z]+[0-5]?)");
  std::vector<std::string> out;
  out.reserve(letters + 1);
  for (size_t i = 0; i < letters; ++i) out.emplace_back(1, syllable[i]);
  if (letters < syllable.size()) out.push_back(std::string("<t") + syllable[letters] + ">");
  return out;
}

std::vector<LetterToken> TagLanguage(const std::vector<std::string>& symbols, Lang lang) {
  Require(lang != Lang::kShared, "tag_language: language must be mand or shdia");
  std::vector<LetterToken> out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) out.push_back({IsSpecialSymbol(s) ? Lang::kShared : lang, s});
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* name : kSpecialNames) {
    index_.emplace(LetterToken{Lang::kShared, name}, static_cast<int>(tokens_.size()));
    tokens_.push_back({Lang::kShared, name});
  }
}

Vocabulary Vocabulary::Build(const Manifest& manifest, const FrontendOptions& options) {
  std::set<LetterToken> observed;
  for (const auto& u : manifest) {
    for (const auto& syl : u.syllables) {
      std::vector<std::string> letters;
      try {
        letters = SyllableToLetters(syl);
      } catch (const Error& e) {
        Fail(ErrorKind::kInvalidArgument, "utterance '" + u.id + "': " + e.what());
      }
      for (auto& tok : TagLanguage(letters, options.TokenLang(u.lang))) observed.insert(std::move(tok));
    }
  }
  Vocabulary v;
  for (const auto& tok : observed) {
    v.index_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::FromTokens(const std::vector<LetterToken>& tokens) {
  Vocabulary v;
  for (size_t i = 0; i < Vocabulary::kNumSpecials; ++i) {
    if (i >= tokens.size() || tokens[i] != v.tokens_[i]) {
      Fail(ErrorKind::kCorrupt, "vocabulary must start with PAD, BOS, EOS, SP");
    }
  }
  for (size_t i = kNumSpecials; i < tokens.size(); ++i) {
    if (!v.index_.emplace(tokens[i], static_cast<int>(v.tokens_.size())).second) {
      Fail(ErrorKind::kCorrupt, "duplicate vocabulary entry " + tokens[i].ToString());
    }
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

std::optional<int> Vocabulary::Find(const LetterToken& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::Id(const LetterToken& token) const {
  auto id = Find(token);
  if (!id) Fail(ErrorKind::kOutOfVocabulary, "token " + token.ToString() + " not in vocabulary");
  return *id;
}

const LetterToken& Vocabulary::Token(int id) const {
  if (id < 0 || id >= size()) Fail(ErrorKind::kOutOfVocabulary, "token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

void Vocabulary::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write vocabulary " + path);
  for (const auto& t : tokens_) out << t.ToString() << "\n";
}

Vocabulary Vocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open vocabulary " + path);
  std::vector<LetterToken> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(LetterToken::Parse(line));
  }
  return FromTokens(tokens);
}

TokenSequence EncodeTranscript(const std::vector<std::string>& syllables, Lang lang, const Vocabulary& vocab,
                               bool insert_pauses) {
  TokenSequence seq;
  seq.lang = lang;
  seq.ids.push_back(Vocabulary::kBos);
  std::vector<std::string> missing;
  for (size_t i = 0; i < syllables.size(); ++i) {
    if (insert_pauses && i > 0) seq.ids.push_back(Vocabulary::kSp);
    for (const auto& tok : TagLanguage(SyllableToLetters(syllables[i]), lang)) {
      if (auto id = vocab.Find(tok)) {
        seq.ids.push_back(*id);
      } else if (std::find(missing.begin(), missing.end(), tok.ToString()) == missing.end()) {
        missing.push_back(tok.ToString());
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    Fail(ErrorKind::kOutOfVocabulary, "out-of-vocabulary tokens: " + list);
  }
  seq.ids.push_back(Vocabulary::kEos);
  return seq;
}

std::vector<std::string> DecodeTokens(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(current);
    current.clear();
  };
  for (int id : seq.ids) {
    const LetterToken& tok = vocab.Token(id);
    if (tok.lang == Lang::kShared) {
      if (tok.symbol == "SP" || tok.symbol == "EOS") flush();
      continue;
    }
    if (IsToneToken(tok.symbol)) {
      current += tok.symbol[2];
      flush();
    } else {
      current += tok.symbol;
    }
  }
  flush();
  return out;
}

size_t CountLetterTokens(const std::vector<std::string>& syllables) {
  size_t n = 0;
  for (const auto& s : syllables) n += SyllableToLetters(s).size();
  return n;
}

}  // namespace lrtts
