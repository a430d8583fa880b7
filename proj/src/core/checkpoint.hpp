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

#include <optional>
#include <string>

#include "json.hpp"
#include "optimizer.hpp"

namespace lrtts {

inline constexpr int kCheckpointVersion = 1;

enum class ModelKind { kAcoustic, kVocoder };
std::string ModelKindName(ModelKind kind);
ModelKind ParseModelKind(const std::string& name);

// Single file: "LRTTCKPT", u64 LE header length, JSON header (version, kind,
// config, meta, tensor directory with name/shape/offset, data checksum),
// then row-major little-endian float32 tensor data.
struct Checkpoint {
  int format_version = kCheckpointVersion;
  ModelKind kind = ModelKind::kAcoustic;
  nlohmann::json config;
  nlohmann::json meta;
  ParamMap tensors;
};

// Values must be float-representable; anything else would not round-trip.
void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
// Errors: kIo (unreadable), kCorrupt (bad magic, truncated, checksum),
// kVersion, kKind (when `expected` is given and differs).
Checkpoint LoadCheckpoint(const std::string& path, std::optional<ModelKind> expected = std::nullopt);

}  // namespace lrtts
