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
#include "manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lrtts {

namespace fs = std::filesystem;

std::string LangName(Lang lang) {
  switch (lang) {
    case Lang::kMand:
      return "mand";
    case Lang::kShdia:
      return "shdia";
    case Lang::kShared:
      return "shared";
  }
  return "shared";
}

Lang ParseLang(const std::string& name) {
  if (name == "mand") return Lang::kMand;
  if (name == "shdia") return Lang::kShdia;
  if (name == "shared") return Lang::kShared;
  Fail(ErrorKind::kInvalidArgument, "unknown language '" + name + "' (expected mand or shdia)");
}

std::vector<std::string> SplitSyllables(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string s;
  while (in >> s) out.push_back(s);
  return out;
}

std::string JoinSyllables(const std::vector<std::string>& syllables) {
  std::string out;
  for (const auto& s : syllables) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

Manifest ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  Manifest out;
  std::set<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      Fail(ErrorKind::kCorrupt, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Utterance u;
    try {
      u.id = j.at("id").get<std::string>();
      u.wav_path = j.value("wav", std::string());
      u.lang = ParseLang(j.at("lang").get<std::string>());
      u.syllables = SplitSyllables(j.value("syllables", std::string()));
      u.duration_s = j.at("dur").get<double>();
      u.approximate = j.value("approximate", false);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      Fail(ErrorKind::kCorrupt, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!u.wav_path.empty() && fs::path(u.wav_path).is_relative()) u.wav_path = (base / u.wav_path).string();
    if (!seen.insert(u.id).second) Fail(ErrorKind::kInvalidArgument, path + ": duplicate utterance id '" + u.id + "'");
    out.push_back(std::move(u));
  }
  return out;
}

void WriteManifest(const std::string& path, const Manifest& manifest) {
  const fs::path base = fs::path(path).parent_path();
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write manifest " + path);
  for (const auto& u : manifest) {
    std::string wav = u.wav_path;
    if (!wav.empty()) {
      const fs::path rel = fs::path(wav).lexically_relative(base.empty() ? fs::path(".") : base);
      if (!rel.empty() && rel.native().rfind("..", 0) != 0) wav = rel.string();
    }
    nlohmann::ordered_json j;
    j["id"] = u.id;
    j["wav"] = wav;
    j["lang"] = LangName(u.lang);
    j["syllables"] = JoinSyllables(u.syllables);
    j["dur"] = u.duration_s;
    if (u.approximate) j["approximate"] = true;
    out << j.dump() << "\n";
  }
  if (!out) Fail(ErrorKind::kIo, "short write to " + path);
}

}  // namespace lrtts
