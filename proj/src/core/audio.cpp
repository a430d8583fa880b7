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
#include "audio.hpp"

#include <cstring>
#include <fstream>

namespace lrtts {

int16_t Quantize16(double x) {
  if (std::isnan(x)) Fail(ErrorKind::kNumeric, "cannot quantize NaN sample");
  const double scaled = std::round(x * 32768.0);
  if (scaled >= 32767.0) return 32767;
  if (scaled <= -32768.0) return -32768;
  return static_cast<int16_t>(scaled);
}

namespace {

uint32_t ReadU32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) | (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t ReadU16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void PutU16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

std::vector<double> LoadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open wav file " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    Fail(ErrorKind::kCorrupt, path + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t size = ReadU32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) Fail(ErrorKind::kCorrupt, path + ": truncated fmt chunk");
      const uint16_t format = ReadU16(bytes.data() + body);
      const uint16_t channels = ReadU16(bytes.data() + body + 2);
      const uint32_t rate = ReadU32(bytes.data() + body + 4);
      const uint16_t bits = ReadU16(bytes.data() + body + 14);
      if (format != 1) Fail(ErrorKind::kInvalidArgument, path + ": expected PCM format 1, found " + std::to_string(format));
      if (channels != 1) Fail(ErrorKind::kInvalidArgument, path + ": expected 1 channel, found " + std::to_string(channels));
      if (rate != kSampleRate) {
        Fail(ErrorKind::kInvalidArgument,
             path + ": expected " + std::to_string(kSampleRate) + " Hz, found " + std::to_string(rate) + " Hz");
      }
      if (bits != 16) Fail(ErrorKind::kInvalidArgument, path + ": expected 16-bit samples, found " + std::to_string(bits));
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) Fail(ErrorKind::kCorrupt, path + ": data chunk before fmt chunk");
      if (body + size > bytes.size()) Fail(ErrorKind::kCorrupt, path + ": truncated data chunk");
      std::vector<double> samples(size / 2);
      for (size_t i = 0; i < samples.size(); ++i) {
        const auto code = static_cast<int16_t>(ReadU16(bytes.data() + body + 2 * i));
        samples[i] = Dequantize16(code);
      }
      return samples;
    }
    pos = body + size + (size & 1);
  }
  Fail(ErrorKind::kCorrupt, path + ": no data chunk");
}

void SaveWavCodes(const std::string& path, std::span<const int16_t> codes) {
  const auto data_bytes = static_cast<uint32_t>(codes.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, 1);
  PutU32(out, kSampleRate);
  PutU32(out, kSampleRate * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, data_bytes);
  for (int16_t c : codes) PutU16(out, static_cast<uint16_t>(c));
  std::ofstream f(path, std::ios::binary);
  if (!f) Fail(ErrorKind::kIo, "cannot write wav file " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) Fail(ErrorKind::kIo, "short write to " + path);
}

void SaveWav(const std::string& path, std::span<const double> samples) {
  std::vector<int16_t> codes(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) codes[i] = Quantize16(samples[i]);
  SaveWavCodes(path, codes);
}

}  // namespace lrtts
