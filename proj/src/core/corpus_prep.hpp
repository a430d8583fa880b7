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

#include <span>
#include <string>
#include <vector>

#include "manifest.hpp"

namespace lrtts {

struct SilenceInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  double duration() const { return end_s - start_s; }
};

struct SilenceOptions {
  double frame_ms = 25.0;  // hop == frame
  double threshold_db = -40.0;
  double min_silence_ms = 300.0;
  int sample_rate = 16000;
};

// Frame RMS in dBFS; runs of frames below the threshold lasting at least
// min_silence_ms. The trailing partial frame is scored on what remains.
std::vector<SilenceInterval> DetectSilence(std::span<const double> samples, const SilenceOptions& options = {});
// Per-frame RMS level in dBFS (-inf for digital silence).
std::vector<double> FrameLevelsDb(std::span<const double> samples, int frame_len);

struct Segment {
  Utterance utterance;
  Index begin_sample = 0;  // into the source recording
  Index end_sample = 0;
  Index speech_samples = 0;
};

struct SegmentationResult {
  std::vector<Segment> segments;
  std::vector<std::string> warnings;
};

struct SegmentOptions {
  double max_len_s = 7.0;
  double frame_ms = 25.0;  // energy grid for forced cuts
  int sample_rate = 16000;
};

// Cuts at silence midpoints, greedily packing pieces up to max_len_s. Runs of
// speech longer than the cap without any silence are cut at the minimum-energy
// frame inside the window that keeps every piece under the cap (warning
// emitted). Segments that are pure silence are dropped.
SegmentationResult SegmentUtterance(const Utterance& utt, std::span<const double> samples,
                                    const std::vector<SilenceInterval>& silences, const SegmentOptions& options = {});

struct RateFilterResult {
  Manifest kept;
  Manifest dropped;
};

// Letter tokens per second must lie in [min_rate, max_rate].
RateFilterResult FilterByRate(const Manifest& manifest, double min_rate = 2.0, double max_rate = 12.0);

struct LengthHistogram {
  double bin_width_s = 1.0;
  std::vector<long> counts;
  long total = 0;
};

// Bin k holds durations in (k*w, (k+1)*w], so a segment of exactly the cap
// lands in the last bin under it.
LengthHistogram ComputeLengthHistogram(const Manifest& manifest, double bin_width_s = 1.0);
// CSV with header bin_start_s,count.
void WriteHistogramCsv(const std::string& path, const LengthHistogram& hist);

}  // namespace lrtts
