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
#include "checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace lrtts {

namespace {

constexpr char kMagic[8] = {'L', 'R', 'T', 'T', 'C', 'K', 'P', 'T'};

uint64_t Fnv1a(const std::string& data, size_t begin) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = begin; i < data.size(); ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

void PutFloat(std::string& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float GetFloat(const unsigned char* p) {
  const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                        (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

[[noreturn]] void Corrupt(const std::string& path, const std::string& why) {
  Fail(ErrorKind::kCorrupt, "corrupt checkpoint " + path + ": " + why);
}

}  // namespace

std::string ModelKindName(ModelKind kind) { return kind == ModelKind::kAcoustic ? "acoustic" : "vocoder"; }

ModelKind ParseModelKind(const std::string& name) {
  if (name == "acoustic") return ModelKind::kAcoustic;
  if (name == "vocoder") return ModelKind::kVocoder;
  Fail(ErrorKind::kInvalidArgument, "unknown model kind '" + name + "'");
}

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string data;
  nlohmann::ordered_json dir = nlohmann::ordered_json::array();
  for (const auto& [name, m] : ckpt.tensors) {
    const size_t offset = data.size();
    for (Index i = 0; i < m.size(); ++i) {
      const double v = m.data()[i];
      const float f = static_cast<float>(v);
      if (static_cast<double>(f) != v && !(std::isnan(v) && std::isnan(f))) {
        Fail(ErrorKind::kInvalidArgument, "checkpoint: tensor " + name + " holds a value that is not float32-exact");
      }
      PutFloat(data, f);
    }
    dir.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
  }
  nlohmann::ordered_json header;
  header["version"] = ckpt.format_version;
  header["kind"] = ModelKindName(ckpt.kind);
  header["config"] = ckpt.config;
  header["meta"] = ckpt.meta;
  header["tensors"] = dir;
  header["data_bytes"] = data.size();
  header["data_fnv1a64"] = Fnv1a(data, 0);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  const uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
  out += text;
  out += data;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) Fail(ErrorKind::kIo, "cannot write checkpoint " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) Fail(ErrorKind::kIo, "failed writing checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::string& path, std::optional<ModelKind> expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) Fail(ErrorKind::kIo, "cannot open checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) Corrupt(path, "bad magic");
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  if (len > bytes.size() - 16) Corrupt(path, "truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    Corrupt(path, std::string("unreadable header: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.format_version = header.at("version").get<int>();
    if (ckpt.format_version != kCheckpointVersion) {
      Fail(ErrorKind::kVersion, "checkpoint " + path + " has format version " + std::to_string(ckpt.format_version) +
                                    ", this build reads version " + std::to_string(kCheckpointVersion));
    }
    const std::string kind = header.at("kind").get<std::string>();
    if (kind != "acoustic" && kind != "vocoder") Corrupt(path, "unknown model kind '" + kind + "'");
    ckpt.kind = ParseModelKind(kind);
    if (expected && *expected != ckpt.kind) {
      Fail(ErrorKind::kKind, "checkpoint " + path + " holds a " + kind + " model, expected " +
                                 ModelKindName(*expected));
    }
    ckpt.config = header.at("config");
    ckpt.meta = header.value("meta", nlohmann::json::object());
    const size_t data_begin = 16 + len;
    const auto data_bytes = header.at("data_bytes").get<uint64_t>();
    if (bytes.size() - data_begin != data_bytes) Corrupt(path, "tensor data truncated or padded");
    if (Fnv1a(bytes, data_begin) != header.at("data_fnv1a64").get<uint64_t>()) Corrupt(path, "checksum mismatch");
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + data_begin);
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("shape").at(0).get<Index>();
      const auto cols = t.at("shape").at(1).get<Index>();
      const auto offset = t.at("offset").get<uint64_t>();
      if (rows < 0 || cols < 0 || offset + 4ull * rows * cols > data_bytes) Corrupt(path, "tensor " + name + " out of range");
      Mat m(rows, cols);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = GetFloat(data + offset + 4 * i);
      if (!ckpt.tensors.emplace(name, std::move(m)).second) Corrupt(path, "duplicate tensor " + name);
    }
  } catch (const nlohmann::json::exception& e) {
    Corrupt(path, std::string("malformed header: ") + e.what());
  }
  return ckpt;
}

}  // namespace lrtts
