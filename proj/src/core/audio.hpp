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
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace lrtts {

inline constexpr int kSampleRate = 16000;

// Nearest 16-bit code: clamp(round(x * 32768), -32768, 32767). NaN is an error.
int16_t Quantize16(double x);
inline double Dequantize16(int16_t code) { return static_cast<double>(code) / 32768.0; }

// Mono 16 kHz 16-bit PCM only; anything else is rejected with expected vs found.
std::vector<double> LoadWav(const std::string& path);
void SaveWav(const std::string& path, std::span<const double> samples);
void SaveWavCodes(const std::string& path, std::span<const int16_t> codes);

}  // namespace lrtts
