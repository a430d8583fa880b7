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
#include "corpus_prep.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

#include "frontend.hpp"

namespace lrtts {

std::vector<double> FrameLevelsDb(std::span<const double> samples, int frame_len) {
  std::vector<double> levels;
  for (size_t start = 0; start < samples.size(); start += static_cast<size_t>(frame_len)) {
    const size_t end = std::min(samples.size(), start + static_cast<size_t>(frame_len));
    double sq = 0.0;
    for (size_t i = start; i < end; ++i) sq += samples[i] * samples[i];
    const double rms = std::sqrt(sq / static_cast<double>(end - start));
    levels.push_back(rms > 0.0 ? 20.0 * std::log10(rms) : -std::numeric_limits<double>::infinity());
  }
  return levels;
}

std::vector<SilenceInterval> DetectSilence(std::span<const double> samples, const SilenceOptions& opt) {
  if (samples.empty()) Fail(ErrorKind::kInvalidArgument, "empty audio");
  Require(opt.frame_ms > 0.0, "detect_silence: frame_ms must be positive");
  Require(opt.min_silence_ms >= opt.frame_ms, "detect_silence: min_silence_ms must be >= frame_ms");
  const int frame_len = std::max(1, static_cast<int>(std::lround(opt.frame_ms * opt.sample_rate / 1000.0)));
  const auto levels = FrameLevelsDb(samples, frame_len);
  const double total_s = static_cast<double>(samples.size()) / opt.sample_rate;
  std::vector<SilenceInterval> out;
  size_t k = 0;
  while (k < levels.size()) {
    if (levels[k] >= opt.threshold_db) {
      ++k;
      continue;
    }
    size_t end = k;
    while (end < levels.size() && levels[end] < opt.threshold_db) ++end;
    const double start_s = static_cast<double>(k * frame_len) / opt.sample_rate;
    const double end_s = std::min(total_s, static_cast<double>(end * frame_len) / opt.sample_rate);
    if ((end_s - start_s) * 1000.0 >= opt.min_silence_ms - 1e-9) out.push_back({start_s, end_s});
    k = end;
  }
  return out;
}

namespace {

struct Span {
  Index begin;
  Index end;
};

Index SilenceOverlap(Index a, Index b, const std::vector<Span>& silences) {
  Index total = 0;
  for (const auto& s : silences) total += std::max<Index>(0, std::min(b, s.end) - std::max(a, s.begin));
  return total;
}

// Splits [p, q) into ceil(len/cap) pieces, each cut at the lowest-energy frame
// within the window that keeps every piece within the cap.
std::vector<Index> ForcedCuts(Index p, Index q, Index cap, std::span<const double> samples, int frame_len) {
  const Index len = q - p;
  const Index n = (len + cap - 1) / cap;
  const Index slack = (n * cap - len) / (2 * n);
  std::vector<Index> cuts;
  for (Index i = 1; i < n; ++i) {
    const Index ideal = p + (i * len) / n;
    const Index lo = std::max(p + 1, ideal - slack);
    const Index hi = std::min(q - 1, ideal + slack);
    Index best = ideal;
    double best_energy = std::numeric_limits<double>::infinity();
    Index best_dist = std::numeric_limits<Index>::max();
    // Candidate cut points are frame centres on the global frame grid.
    for (Index f = lo / frame_len; f * frame_len <= hi; ++f) {
      const Index centre = f * frame_len + frame_len / 2;
      if (centre < lo || centre > hi) continue;
      const Index fb = f * frame_len;
      const Index fe = std::min<Index>(fb + frame_len, static_cast<Index>(samples.size()));
      double e = 0.0;
      for (Index s = fb; s < fe; ++s) e += samples[s] * samples[s];
      e /= static_cast<double>(std::max<Index>(1, fe - fb));
      const Index dist = std::abs(centre - ideal);
      if (e < best_energy || (e == best_energy && dist < best_dist)) {
        best = centre;
        best_energy = e;
        best_dist = dist;
      }
    }
    cuts.push_back(best);
  }
  return cuts;
}

std::string SegmentId(const std::string& base, size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_s%03zu", index);
  return base + buf;
}

}  // namespace

SegmentationResult SegmentUtterance(const Utterance& utt, std::span<const double> samples,
                                    const std::vector<SilenceInterval>& silences, const SegmentOptions& opt) {
  Require(opt.max_len_s > 0.0, "segment_utterance: max_len_s must be positive");
  const Index n = static_cast<Index>(samples.size());
  const double sr = opt.sample_rate;
  // Floor keeps every emitted duration <= max_len_s exactly.
  const Index cap = static_cast<Index>(std::floor(opt.max_len_s * sr + 1e-9));
  Require(cap > 0, "segment_utterance: cap shorter than one sample");
  const int frame_len = std::max(1, static_cast<int>(std::lround(opt.frame_ms * sr / 1000.0)));

  std::vector<Span> sil;
  for (const auto& s : silences) {
    const Index b = std::clamp<Index>(static_cast<Index>(std::llround(s.start_s * sr)), 0, n);
    const Index e = std::clamp<Index>(static_cast<Index>(std::llround(s.end_s * sr)), 0, n);
    if (e > b) sil.push_back({b, e});
  }
  std::sort(sil.begin(), sil.end(), [](const Span& a, const Span& b) { return a.begin < b.begin; });

  std::vector<Index> bounds = {0};
  for (const auto& s : sil) {
    const Index mid = (s.begin + s.end) / 2;
    if (mid > bounds.back() && mid < n) bounds.push_back(mid);
  }
  if (n > bounds.back()) bounds.push_back(n);

  SegmentationResult result;
  std::vector<Span> pieces;
  for (size_t i = 0; i + 1 < bounds.size(); ++i) {
    const Index p = bounds[i];
    const Index q = bounds[i + 1];
    if (q - p <= cap) {
      pieces.push_back({p, q});
      continue;
    }
    const auto cuts = ForcedCuts(p, q, cap, samples, frame_len);
    Index prev = p;
    for (Index c : cuts) {
      pieces.push_back({prev, c});
      prev = c;
    }
    pieces.push_back({prev, q});
    char msg[256];
    std::snprintf(msg, sizeof(msg), "%s: %.3f s run without usable silence; forced %zu cut(s) at minimum-energy frames",
                  utt.id.c_str(), static_cast<double>(q - p) / sr, cuts.size());
    result.warnings.emplace_back(msg);
  }

  std::vector<Span> spans;
  for (const auto& piece : pieces) {
    if (!spans.empty() && piece.end - spans.back().begin <= cap) {
      spans.back().end = piece.end;
    } else {
      spans.push_back(piece);
    }
  }

  std::vector<Segment> kept;
  for (const auto& s : spans) {
    const Index speech = (s.end - s.begin) - SilenceOverlap(s.begin, s.end, sil);
    if (speech <= 0) continue;
    Segment seg;
    seg.begin_sample = s.begin;
    seg.end_sample = s.end;
    seg.speech_samples = speech;
    kept.push_back(seg);
  }

  Index total_speech = 0;
  for (const auto& s : kept) total_speech += s.speech_samples;
  const size_t n_syl = utt.syllables.size();
  Index cum = 0;
  size_t syl_begin = 0;
  for (size_t i = 0; i < kept.size(); ++i) {
    cum += kept[i].speech_samples;
    const size_t syl_end = (i + 1 == kept.size())
                               ? n_syl
                               : static_cast<size_t>(std::llround(static_cast<double>(n_syl) * cum / total_speech));
    Utterance u = utt;
    u.id = kept.size() == 1 ? utt.id : SegmentId(utt.id, i);
    u.duration_s = static_cast<double>(kept[i].end_sample - kept[i].begin_sample) / sr;
    u.syllables.assign(utt.syllables.begin() + static_cast<std::ptrdiff_t>(std::min(syl_begin, n_syl)),
                       utt.syllables.begin() + static_cast<std::ptrdiff_t>(std::max(syl_begin, std::min(syl_end, n_syl))));
    u.approximate = utt.approximate || kept.size() > 1;
    syl_begin = std::max(syl_begin, syl_end);
    kept[i].utterance = std::move(u);
  }
  result.segments = std::move(kept);
  return result;
}

RateFilterResult FilterByRate(const Manifest& manifest, double min_rate, double max_rate) {
  RateFilterResult r;
  for (const auto& u : manifest) {
    if (!(u.duration_s > 0.0)) Fail(ErrorKind::kInvalidArgument, "utterance '" + u.id + "' has non-positive duration");
    size_t tokens = 0;
    try {
      tokens = CountLetterTokens(u.syllables);
    } catch (const Error& e) {
      Fail(ErrorKind::kInvalidArgument, "utterance '" + u.id + "': " + e.what());
    }
    const double rate = static_cast<double>(tokens) / u.duration_s;
    (rate >= min_rate && rate <= max_rate ? r.kept : r.dropped).push_back(u);
  }
  return r;
}

LengthHistogram ComputeLengthHistogram(const Manifest& manifest, double bin_width_s) {
  Require(bin_width_s > 0.0, "length_histogram: bin width must be positive");
  LengthHistogram h;
  h.bin_width_s = bin_width_s;
  for (const auto& u : manifest) {
    const long k = std::max(0L, static_cast<long>(std::ceil(u.duration_s / bin_width_s)) - 1);
    if (static_cast<size_t>(k) >= h.counts.size()) h.counts.resize(static_cast<size_t>(k) + 1, 0);
    ++h.counts[static_cast<size_t>(k)];
    ++h.total;
  }
  return h;
}

void WriteHistogramCsv(const std::string& path, const LengthHistogram& hist) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write histogram " + path);
  out << "bin_start_s,count\n";
  for (size_t k = 0; k < hist.counts.size(); ++k) {
    out << static_cast<double>(k) * hist.bin_width_s << "," << hist.counts[k] << "\n";
  }
}

}  // namespace lrtts
