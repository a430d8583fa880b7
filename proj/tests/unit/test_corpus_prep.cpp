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
#include <algorithm>
#include <cmath>

#include "corpus_prep.hpp"
#include "doctest.h"
#include "frontend.hpp"
#include "test_util.hpp"
#include "toy_corpus.hpp"

using namespace lrtts;

namespace {

constexpr int kSr = 16000;

Utterance MakeUtt(const std::string& id, double dur, int n_syl = 0) {
  Utterance u;
  u.id = id;
  u.duration_s = dur;
  for (int i = 0; i < n_syl; ++i) u.syllables.push_back("ba1");
  return u;
}

void Append(std::vector<double>& x, const std::vector<double>& y) { x.insert(x.end(), y.begin(), y.end()); }

std::vector<double> Zeros(double seconds) { return std::vector<double>(static_cast<size_t>(seconds * kSr), 0.0); }

// Independent RMS scan: silent frames below the threshold, runs of at least
// min_frames frames.
std::vector<std::pair<size_t, size_t>> OracleSilentRuns(const std::vector<double>& x, int frame, double thr_db,
                                                        size_t min_frames) {
  std::vector<bool> quiet;
  for (size_t s = 0; s < x.size(); s += frame) {
    const size_t e = std::min(x.size(), s + frame);
    double sq = 0.0;
    for (size_t i = s; i < e; ++i) sq += x[i] * x[i];
    quiet.push_back(10.0 * std::log10(sq / (e - s) + 1e-300) < thr_db);
  }
  std::vector<std::pair<size_t, size_t>> runs;
  for (size_t k = 0; k < quiet.size();) {
    if (!quiet[k]) {
      ++k;
      continue;
    }
    size_t e = k;
    while (e < quiet.size() && quiet[e]) ++e;
    if (e - k >= min_frames) runs.emplace_back(k, e);
    k = e;
  }
  return runs;
}

}  // namespace

TEST_CASE("detect_silence examples") {
  SUBCASE("all zeros") {
    const auto s = DetectSilence(Zeros(5.0));
    REQUIRE(s.size() == 1);
    CHECK(s[0].start_s == 0.0);
    CHECK(s[0].end_s == doctest::Approx(5.0));
  }
  SUBCASE("loud tone has no silence") {
    const double amp = std::pow(10.0, -6.0 / 20.0) * std::sqrt(2.0);  // -6 dBFS RMS
    CHECK(DetectSilence(test::Tone(440.0, 1.0, amp)).empty());
  }
  SUBCASE("gap between two tones") {
    auto x = test::Tone(300.0, 2.0, 0.5);
    Append(x, Zeros(1.0));
    Append(x, test::Tone(300.0, 2.0, 0.5));
    const auto s = DetectSilence(x);
    const auto oracle = OracleSilentRuns(x, 400, -40.0, 12);
    REQUIRE(s.size() == 1);
    REQUIRE(oracle.size() == 1);
    CHECK(s[0].start_s == doctest::Approx(oracle[0].first * 400.0 / kSr));
    CHECK(s[0].end_s == doctest::Approx(oracle[0].second * 400.0 / kSr));
    CHECK(std::abs(s[0].start_s - 2.0) <= 0.025);
    CHECK(std::abs(s[0].end_s - 3.0) <= 0.025);
  }
  SUBCASE("errors") {
    std::vector<double> empty;
    CHECK_THROWS_AS(DetectSilence(empty), Error);
    SilenceOptions bad;
    bad.min_silence_ms = 10.0;
    CHECK_THROWS_AS(DetectSilence(Zeros(1.0), bad), Error);
  }
}

TEST_CASE("detect_silence postconditions on random layouts") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x;
    const int parts = 2 + static_cast<int>(rng.Below(6));
    for (int p = 0; p < parts; ++p) {
      if (rng.Below(2)) {
        Append(x, test::Tone(rng.Uniform(100, 2000), rng.Uniform(0.05, 1.5), rng.Uniform(0.05, 0.8)));
      } else {
        auto z = Zeros(rng.Uniform(0.05, 1.0));
        for (auto& v : z) v = 1e-4 * rng.Normal();
        Append(x, z);
      }
    }
    if (x.empty()) continue;
    const SilenceOptions opt;
    const auto s = DetectSilence(x, opt);
    const auto levels = FrameLevelsDb(x, 400);
    const double total = static_cast<double>(x.size()) / kSr;
    for (size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].start_s >= 0.0);
      CHECK(s[i].start_s < s[i].end_s);
      CHECK(s[i].end_s <= total + 1e-12);
      CHECK(s[i].duration() * 1000.0 >= opt.min_silence_ms - 1e-6);
      if (i > 0) CHECK(s[i].start_s >= s[i - 1].end_s);
      for (size_t f = static_cast<size_t>(std::lround(s[i].start_s * kSr)) / 400;
           f * 400 < static_cast<size_t>(std::lround(s[i].end_s * kSr)); ++f) {
        CHECK(levels[f] < opt.threshold_db);
      }
    }
  }
}

TEST_CASE("detect_silence follows a shifted threshold under scaling") {
  Rng rng(8);
  std::vector<double> x;
  for (int p = 0; p < 6; ++p) {
    Append(x, test::Tone(rng.Uniform(200, 900), rng.Uniform(0.3, 1.0), 0.4));
    auto z = Zeros(rng.Uniform(0.35, 0.8));
    for (auto& v : z) v = 1e-3 * rng.Normal();
    Append(x, z);
  }
  std::vector<double> half = x;
  for (auto& v : half) v *= 0.5;
  SilenceOptions a, b;
  b.threshold_db = a.threshold_db + 20.0 * std::log10(0.5);
  const auto sa = DetectSilence(x, a), sb = DetectSilence(half, b);
  REQUIRE(sa.size() == sb.size());
  for (size_t i = 0; i < sa.size(); ++i) {
    CHECK(std::abs(sa[i].start_s - sb[i].start_s) <= 0.025 + 1e-9);
    CHECK(std::abs(sa[i].end_s - sb[i].end_s) <= 0.025 + 1e-9);
  }
}

TEST_CASE("segment_utterance examples") {
  SUBCASE("short utterance passes through") {
    auto x = test::Tone(440.0, 3.0, 0.3);
    const auto utt = MakeUtt("short", 3.0, 4);
    const auto r = SegmentUtterance(utt, x, DetectSilence(x));
    REQUIRE(r.segments.size() == 1);
    CHECK(r.segments[0].utterance.id == "short");
    CHECK(r.segments[0].utterance.syllables == utt.syllables);
    CHECK(r.segments[0].begin_sample == 0);
    CHECK(r.segments[0].end_sample == static_cast<Index>(x.size()));
    CHECK_FALSE(r.segments[0].utterance.approximate);
    CHECK(r.warnings.empty());
  }
  SUBCASE("twenty seconds with two pauses") {
    std::vector<double> x;
    Append(x, test::Tone(300, 5.75, 0.3));
    Append(x, Zeros(0.5));
    Append(x, test::Tone(500, 6.5, 0.3));
    Append(x, Zeros(0.5));
    Append(x, test::Tone(700, 6.75, 0.3));
    const auto utt = MakeUtt("long", 20.0, 30);
    const auto sil = DetectSilence(x);
    const auto r = SegmentUtterance(utt, x, sil);
    // Greedy oracle: midpoints split 20 s into pieces of 6, 7 and 7 s; no
    // neighbouring pair fits under the cap.
    std::vector<double> mids;
    for (const auto& s : sil) mids.push_back(0.5 * (s.start_s + s.end_s));
    REQUIRE(mids.size() == 2);
    CHECK(mids[0] == doctest::Approx(6.0).epsilon(0.01));
    CHECK(mids[1] == doctest::Approx(13.0).epsilon(0.01));
    REQUIRE(r.segments.size() == 3);
    size_t syl = 0;
    for (const auto& s : r.segments) {
      CHECK(s.utterance.duration_s <= 7.0);
      CHECK(s.utterance.approximate);
      syl += s.utterance.syllables.size();
    }
    CHECK(syl == 30);
    CHECK(r.warnings.empty());
  }
  SUBCASE("continuous speech gets a forced cut at the quietest frame") {
    // 9 s tone with one quieter (still voiced) frame; the frame must lie in
    // the window of admissible cuts.
    auto x = test::Tone(440.0, 9.0, 0.5);
    const size_t dip = 160 * 400;  // 4.0 s, frame aligned
    for (size_t i = dip; i < dip + 400; ++i) x[i] *= 0.1;
    const auto utt = MakeUtt("run", 9.0, 10);
    const auto sil = DetectSilence(x);
    CHECK(sil.empty());
    const auto r = SegmentUtterance(utt, x, sil);
    REQUIRE(r.segments.size() == 2);
    CHECK(r.warnings.size() == 1);
    CHECK(r.segments[0].end_sample == static_cast<Index>(dip + 200));
    CHECK(r.segments[1].begin_sample == static_cast<Index>(dip + 200));
    for (const auto& s : r.segments) CHECK(s.utterance.duration_s <= 7.0);
  }
  SUBCASE("pure silence produces nothing") {
    const auto x = Zeros(3.0);
    const auto r = SegmentUtterance(MakeUtt("quiet", 3.0, 1), x, DetectSilence(x));
    CHECK(r.segments.empty());
  }
}

TEST_CASE("segment_utterance properties on random recordings") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x;
    const int parts = 2 + static_cast<int>(rng.Below(8));
    for (int p = 0; p < parts; ++p) {
      Append(x, test::Tone(rng.Uniform(150, 3000), rng.Uniform(0.2, trial % 5 == 0 ? 12.0 : 5.0), 0.3));
      Append(x, Zeros(rng.Uniform(0.0, 1.2)));
    }
    const auto utt = MakeUtt("r" + std::to_string(trial), x.size() / double(kSr), 12);
    const auto sil = DetectSilence(x);
    const auto r = SegmentUtterance(utt, x, sil);

    double total_sil = 0.0;
    for (const auto& s : sil) total_sil += s.duration();
    double out = 0.0;
    double longest = 0.0;
    for (const auto& s : r.segments) {
      out += s.utterance.duration_s;
      longest = std::max(longest, s.utterance.duration_s);
    }
    const double in = static_cast<double>(x.size()) / kSr;
    CHECK(longest <= 7.0);
    CHECK(out <= in + 1e-9);
    CHECK(out >= in - total_sil - 1e-9);

    // Every non-silent sample lands in exactly one segment, in order.
    std::vector<int> owner(x.size(), -1);
    for (size_t k = 0; k < r.segments.size(); ++k) {
      if (k > 0) CHECK(r.segments[k].begin_sample >= r.segments[k - 1].end_sample);
      for (Index i = r.segments[k].begin_sample; i < r.segments[k].end_sample; ++i) owner[i] = static_cast<int>(k);
    }
    std::vector<bool> silent(x.size(), false);
    for (const auto& s : sil) {
      for (Index i = std::llround(s.start_s * kSr); i < std::min<Index>(std::llround(s.end_s * kSr), x.size()); ++i) {
        silent[i] = true;
      }
    }
    size_t lost = 0;
    for (size_t i = 0; i < x.size(); ++i) lost += (!silent[i] && owner[i] < 0) ? 1 : 0;
    CHECK(lost == 0);
  }
}

TEST_CASE("filter_by_rate") {
  SUBCASE("examples") {
    Utterance fast = MakeUtt("fast", 2.0);
    fast.syllables.assign(10, "bang");  // 40 letters in 2 s
    Utterance fine = MakeUtt("fine", 5.0);
    fine.syllables.assign(5, "bang");  // 20 letters... plus 5 more below
    fine.syllables.push_back("mango");  // 25 letters in 5 s
    const auto r = FilterByRate({fast, fine}, 2.0, 12.0);
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].id == "fast");
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].id == "fine");
    const auto e = FilterByRate({});
    CHECK(e.kept.empty());
    CHECK(e.dropped.empty());
  }
  SUBCASE("bounds are inclusive") {
    Utterance lo = MakeUtt("lo", 2.0);
    lo.syllables = {"ab", "cd"};  // exactly 2 per second
    Utterance hi = MakeUtt("hi", 1.0);
    hi.syllables = {"abcdef", "ghijkl"};  // exactly 12 per second
    CHECK(FilterByRate({lo, hi}).kept.size() == 2);
  }
  SUBCASE("non-positive duration names the utterance") {
    try {
      FilterByRate({MakeUtt("zero_len", 0.0, 1)});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("zero_len") != std::string::npos);
    }
  }
  SUBCASE("partition property") {
    Rng rng(6);
    Manifest m;
    for (int i = 0; i < 200; ++i) {
      Utterance u = MakeUtt("p" + std::to_string(i), rng.Uniform(0.2, 8.0));
      const int n = 1 + static_cast<int>(rng.Below(20));
      for (int k = 0; k < n; ++k) u.syllables.push_back("ba1");
      m.push_back(u);
    }
    const auto r = FilterByRate(m);
    CHECK(r.kept.size() + r.dropped.size() == m.size());
    for (const auto& u : r.kept) {
      const double rate = CountLetterTokens(u.syllables) / u.duration_s;
      CHECK(rate >= 2.0);
      CHECK(rate <= 12.0);
    }
    for (const auto& u : r.dropped) {
      const double rate = CountLetterTokens(u.syllables) / u.duration_s;
      CHECK((rate < 2.0 || rate > 12.0));
    }
  }
}

TEST_CASE("length histogram") {
  const auto h = ComputeLengthHistogram({MakeUtt("a", 0.5), MakeUtt("b", 1.5), MakeUtt("c", 1.7)});
  CHECK(h.counts == std::vector<long>{1, 2});
  CHECK(h.total == 3);
  const auto e = ComputeLengthHistogram({});
  CHECK(e.counts.empty());
  CHECK(e.total == 0);
  // A segment at exactly the cap stays below bin ceil(7/w).
  for (double w : {1.0, 0.5, 2.0, 3.0}) {
    const auto c = ComputeLengthHistogram({MakeUtt("cap", 7.0), MakeUtt("x", 0.1)}, w);
    CHECK(static_cast<long>(c.counts.size()) - 1 <= static_cast<long>(std::ceil(7.0 / w)) - 1);
  }
  CHECK_THROWS_AS(ComputeLengthHistogram({}, 0.0), Error);

  Rng rng(1);
  Manifest m;
  for (int i = 0; i < 300; ++i) m.push_back(MakeUtt("h" + std::to_string(i), rng.Uniform(0.01, 12.0)));
  const auto big = ComputeLengthHistogram(m, 0.75);
  long sum = 0;
  for (long c : big.counts) sum += c;
  CHECK(sum == big.total);
  CHECK(big.total == 300);
}

TEST_CASE("toy corpus") {
  test::TempDir dir("toy");
  ToyCorpusOptions o;
  o.n_utts = 6;
  o.mand_fraction = 0.5;
  o.seed = 42;
  SUBCASE("byte-identical per seed") {
    const auto a = GenerateToyCorpus(o, dir / "a");
    const auto b = GenerateToyCorpus(o, dir / "b");
    REQUIRE(a.size() == 6);
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(test::ReadBytes(a[i].wav_path) == test::ReadBytes(b[i].wav_path));
    }
    CHECK(a[0].lang == Lang::kMand);
    CHECK(a[5].lang == Lang::kShdia);
    o.seed = 43;
    const auto c = GenerateToyCorpus(o, dir / "c");
    bool differs = false;
    for (size_t i = 0; i < a.size(); ++i) differs |= a[i].syllables != c[i].syllables;
    CHECK(differs);
  }
  SUBCASE("duration follows the token count") {
    const auto x = RenderToyUtterance({"ba1", "da"}, Lang::kMand, o);  // b a <t1> d a
    CHECK(x.size() == static_cast<size_t>((0.5 + 2 * o.pad_s) * kSr));
  }
  SUBCASE("each burst peaks at its token's mel bin") {
    const AudioConfig c;
    const std::vector<std::string> syl = {"ba1", "zou4", "ming2"};
    for (Lang lang : {Lang::kMand, Lang::kShdia}) {
      const auto x = RenderToyUtterance(syl, lang, o, c);
      const auto mel = ComputeMel(x, c);
      const auto centers = MelCenterFrequencies(c);
      size_t tok = 0;
      for (const auto& s : syl) {
        for (const auto& letter : SyllableToLetters(s)) {
          // Frame whose window sits inside the burst.
          const double mid_s = o.pad_s + (tok + 0.5) * o.token_s;
          const Index f = static_cast<Index>(std::lround((mid_s * kSr - c.win / 2.0) / c.hop));
          Index arg;
          mel.frames.row(f).maxCoeff(&arg);
          const double hz = ToyTokenFrequency(lang, letter, c);
          size_t nearest = 0;
          for (size_t i = 1; i < centers.size(); ++i) {
            if (std::abs(centers[i] - hz) < std::abs(centers[nearest] - hz)) nearest = i;
          }
          CHECK(arg == static_cast<Index>(nearest));
          CHECK(arg == ToyTokenMelBin(lang, letter));
          ++tok;
        }
      }
    }
  }
  SUBCASE("frequencies are distinct per language and symbol") {
    std::vector<double> all;
    for (Lang lang : {Lang::kMand, Lang::kShdia}) {
      for (const auto& s : ToySymbols()) all.push_back(ToyTokenFrequency(lang, s));
    }
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK_THROWS_AS(ToyTokenFrequency(Lang::kMand, "q"), Error);
  }
  SUBCASE("bad options") {
    o.n_utts = 0;
    CHECK_THROWS_AS(GenerateToyCorpus(o, dir / "bad"), Error);
  }
}
