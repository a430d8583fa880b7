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

#include "audio.hpp"
#include "doctest.h"
#include "mol.hpp"
#include "optimizer.hpp"
#include "test_util.hpp"
#include "toy_corpus.hpp"
#include "vocoder.hpp"

using namespace lrtts;

namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct transcription of the discretized logistic, K = 1, no log tricks.
double NaiveDiscretizedLogistic(int k, double mu, double log_s) {
  const double s = std::exp(std::max(log_s, kLogScaleFloor));
  const double x = -1.0 + 2.0 * k / 65535.0;
  const double d = 1.0 / 65535.0;
  const double hi = k == kGridPoints - 1 ? 1.0 : Sigmoid((x + d - mu) / s);
  const double lo = k == 0 ? 0.0 : Sigmoid((x - d - mu) / s);
  return hi - lo;
}

std::vector<double> RandomRow(Rng& rng, int K, double ls_lo = -6.0, double ls_hi = -1.0) {
  std::vector<double> row(3 * K);
  for (int i = 0; i < K; ++i) {
    row[i] = rng.Normal();
    row[K + i] = rng.Uniform(-0.9, 0.9);
    row[2 * K + i] = rng.Uniform(ls_lo, ls_hi);
  }
  return row;
}

VocoderConfig TinyConfig() {
  VocoderConfig c;
  c.layers = 4;
  c.dilations = {1, 2, 1, 2};
  c.residual_channels = 4;
  c.gate_channels = 8;
  c.skip_channels = 6;
  c.conditioning_channels = 3;
  c.n_mixtures = 2;
  c.hop = 10;
  return c;
}

// Xavier weights leave biases at zero; gradient checks want them generic.
void RandomizeBiases(Vocoder& v, uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, m] : v.mutable_params()) {
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(-0.3, 0.3);
      RoundToFloat(m);
    }
  }
}

ConditioningTrack RandomTrack(Rng& rng, Index frames, Index channels, int hop) {
  MelSpectrogram mel;
  mel.frames.resize(frames, channels);
  for (Index i = 0; i < mel.frames.size(); ++i) mel.frames.data()[i] = rng.Normal();
  return UpsampleConditioning(mel, hop);
}

std::vector<double> RandomGridAudio(Rng& rng, Index n, double amp) {
  std::vector<double> a(static_cast<size_t>(n));
  for (auto& v : a) v = rng.Uniform(-amp, amp);
  return SnapTo16Bit(a);
}

}  // namespace

TEST_CASE("grid helpers") {
  CHECK(GridValue(0) == -1.0);
  CHECK(GridValue(kGridPoints - 1) == 1.0);
  CHECK(GridIndex(GridValue(12345)) == 12345);
  CHECK_THROWS_AS(GridIndex(0.5 / 65535.0 + GridValue(7)), Error);
  CHECK(NearestGridIndex(2.0) == kGridPoints - 1);
  CHECK(CodeToGridIndex(-32768) == 0);
  CHECK(GridIndexToCode(CodeToGridIndex(123)) == 123);
}

TEST_CASE("single logistic matches the direct formula") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const double mu = rng.Uniform(-0.95, 0.95);
    const double ls = rng.Uniform(-6.5, -1.0);
    const std::vector<double> row = {rng.Normal(), mu, ls};
    const auto p = MolParams::FromRow(row.data(), 1);
    for (int k : {0, 1, 100, 32768, 40000, 65534, 65535, static_cast<int>(rng.Below(65536))}) {
      const double naive = NaiveDiscretizedLogistic(k, mu, ls);
      if (naive < 1e-12) continue;
      CHECK(MolLogProbAtIndex(k, p) == doctest::Approx(std::log(naive)).epsilon(1e-7));
    }
  }
}

TEST_CASE("mixture normalizes over the grid") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto row = RandomRow(rng, 10, -7.5, 0.0);
    const auto p = MolParams::FromRow(row.data(), 10);
    double total = 0.0;
    for (int k = 0; k < kGridPoints; ++k) total += std::exp(MolLogProbAtIndex(k, p));
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
}

TEST_CASE("mixture symmetry and value lookup") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto row = RandomRow(rng, 3);
    auto mirrored = row;
    for (int i = 0; i < 3; ++i) mirrored[3 + i] = -row[3 + i];
    const auto p = MolParams::FromRow(row.data(), 3);
    const auto q = MolParams::FromRow(mirrored.data(), 3);
    const int k = static_cast<int>(rng.Below(kGridPoints));
    CHECK(MolLogProbAtIndex(k, p) == doctest::Approx(MolLogProbAtIndex(kGridPoints - 1 - k, q)).epsilon(1e-10));
    CHECK(MolLogProb(GridValue(k), p) == MolLogProbAtIndex(k, p));
  }
  const std::vector<double> row = {0.0, 0.0, -3.0};
  CHECK_THROWS_AS(MolLogProb(0.3 / 65535.0, MolParams::FromRow(row.data(), 1)), Error);
}

TEST_CASE("far tails stay finite") {
  const std::vector<double> row = {0.0, 0.99, -7.0};
  const auto p = MolParams::FromRow(row.data(), 1);
  CHECK(std::isfinite(MolLogProbAtIndex(0, p)));
  CHECK(std::isfinite(MolLogProbAtIndex(1000, p)));
  const std::vector<double> floored = {0.0, 0.0, -20.0};
  const std::vector<double> at_floor = {0.0, 0.0, -7.0};
  CHECK(MolLogProbAtIndex(32768, MolParams::FromRow(floored.data(), 1)) ==
        MolLogProbAtIndex(32768, MolParams::FromRow(at_floor.data(), 1)));
}

TEST_CASE("nll gradient matches finite differences") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto row = RandomRow(rng, 4, -6.0, -2.0);
    const int k = CodeToGridIndex(Quantize16(rng.Uniform(-0.9, 0.9)));
    std::vector<double> grad(12);
    MolNllWithGrad(k, MolParams::FromRow(row.data(), 4), grad.data());
    for (int j = 0; j < 12; ++j) {
      const double h = 1e-6;
      auto up = row, dn = row;
      up[j] += h;
      dn[j] -= h;
      const double num = (-MolLogProbAtIndex(k, MolParams::FromRow(up.data(), 4)) +
                          MolLogProbAtIndex(k, MolParams::FromRow(dn.data(), 4))) /
                         (2 * h);
      CHECK(std::abs(num - grad[j]) <= 1e-5 * std::max(1.0, std::abs(num)));
    }
  }
}

TEST_CASE("sampling") {
  SUBCASE("degenerate mixture concentrates on its mean") {
    const std::vector<double> row = {50.0, 0.0, 0.0, 0.42, -0.5, 0.1, -7.0, 0.0, 0.0};
    const auto p = MolParams::FromRow(row.data(), 3);
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) CHECK(std::abs(SampleMol(p, rng) - 0.42) < 0.01);
    CHECK(ModeMeanMol(p) == 0.42);
  }
  SUBCASE("fixed seed reproduces the sequence") {
    Rng r(6);
    const auto row = RandomRow(r, 10);
    const auto p = MolParams::FromRow(row.data(), 10);
    Rng a(77), b(77);
    for (int i = 0; i < 100; ++i) CHECK(SampleMol(p, a) == SampleMol(p, b));
  }
  SUBCASE("single logistic passes a KS test") {
    const double mu = 0.1, s = 0.05;
    const std::vector<double> row = {0.0, mu, std::log(s)};
    const auto p = MolParams::FromRow(row.data(), 1);
    Rng rng(8);
    std::vector<double> xs(100000);
    for (auto& x : xs) x = SampleMol(p, rng);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    const double n = static_cast<double>(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
      const double cdf = Sigmoid((xs[i] - mu) / s);
      d = std::max({d, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
    }
    CHECK(d < 0.01);
  }
  SUBCASE("samples stay in range") {
    const std::vector<double> row = {0.0, 0.999, 0.0};
    const auto p = MolParams::FromRow(row.data(), 1);
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      const double x = SampleMol(p, rng);
      CHECK(x >= -1.0);
      CHECK(x <= 1.0);
    }
  }
}

TEST_CASE("receptive field") {
  const VocoderConfig def;
  CHECK(ReceptiveField(def) == 766);
  CHECK(def.dilations.size() == 24);
  VocoderConfig one;
  one.layers = 1;
  one.dilations = {1};
  CHECK(ReceptiveField(one) == 2);
  VocoderConfig two;
  two.layers = 2;
  two.dilations = {1, 2};
  CHECK(ReceptiveField(two) == 4);
  VocoderConfig bad;
  bad.dilations = {1, 2};
  CHECK_THROWS_AS(ReceptiveField(bad), Error);
}

TEST_CASE("vocoder config json") {
  VocoderConfig c = TinyConfig();
  CHECK(VocoderConfig::FromJson(c.ToJson()) == c);
  auto j = VocoderConfig().ToJson();
  CHECK(VocoderConfig::FromJson(j) == VocoderConfig());
}

TEST_CASE("conditioning upsampling") {
  MelSpectrogram mel;
  mel.frames = Mat::Random(3, 80);
  const auto track = UpsampleConditioning(mel, 200);
  CHECK(track.size() == 600);
  const Mat full = ExpandTrack(track);
  CHECK(full.rows() == 600);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Index k = static_cast<Index>(rng.Below(600));
    CHECK(full.row(k) == mel.frames.row(k / 200));
    CHECK(track.row(k) == mel.frames.row(k / 200));
  }
  mel.frames = Mat::Constant(4, 80, -2.5);
  const Mat c = ExpandTrack(UpsampleConditioning(mel, 200));
  CHECK((c.array() == -2.5).all());
}

TEST_CASE("parallel forward shape, causality and finiteness") {
  const VocoderConfig c;
  const auto v = Vocoder::Initialize(c, 1);
  Rng rng(2);
  const auto cond = RandomTrack(rng, 10, 80, 200);
  auto audio = RandomGridAudio(rng, cond.size(), 0.3);
  const Mat base = v.ForwardParallel(audio, cond);
  CHECK(base.rows() == cond.size());
  CHECK(base.cols() == 30);
  CHECK(base.allFinite());

  const Index t = 1500;
  auto far = audio;
  far[t - 766] += 0.25;
  CHECK((v.ForwardParallel(far, cond).row(t) - base.row(t)).cwiseAbs().maxCoeff() == 0.0);
  auto near = audio;
  near[t - 765] += 0.25;
  CHECK((v.ForwardParallel(near, cond).row(t) - base.row(t)).cwiseAbs().maxCoeff() > 0.0);
  auto future = audio;
  future[t + 1] += 0.25;
  CHECK((v.ForwardParallel(future, cond).row(t) - base.row(t)).cwiseAbs().maxCoeff() == 0.0);

  std::vector<double> short_audio(cond.size() - 1, 0.0);
  CHECK_THROWS_AS(v.ForwardParallel(short_audio, cond), Error);

  ParamMap zeros = v.params();
  for (auto& [n, m] : zeros) m.setZero();
  const Vocoder z(c, zeros);
  const Mat out = z.ForwardParallel(std::vector<double>(cond.size(), 0.0), cond);
  CHECK(out.allFinite());
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("incremental generation matches the parallel pass") {
  for (const VocoderConfig& c : {TinyConfig(), VocoderConfig()}) {
    auto v = Vocoder::Initialize(c, 3);
    RandomizeBiases(v, 4);
    Rng rng(5);
    const auto cond = RandomTrack(rng, 2000 / c.hop, c.conditioning_channels, c.hop);
    GenerateOptions o;
    o.deterministic = true;
    o.record_params = true;
    Rng g(6);
    const auto gen = v.GenerateIncremental(cond, g, o);
    REQUIRE(static_cast<Index>(gen.audio.size()) == cond.size());
    const Mat par = v.ForwardParallel(ShiftRight(gen.audio), cond);
    CHECK((par - gen.params).cwiseAbs().maxCoeff() < 1e-4);
    for (size_t i = 0; i < gen.audio.size(); ++i) CHECK(gen.audio[i] == Dequantize16(gen.codes[i]));
  }
}

TEST_CASE("sampled generation is reproducible") {
  const auto v = Vocoder::Initialize(TinyConfig(), 7);
  Rng rng(1);
  const auto cond = RandomTrack(rng, 50, 3, 10);
  Rng a(9), b(9), c(10);
  const auto x = v.GenerateIncremental(cond, a);
  CHECK(x.codes == v.GenerateIncremental(cond, b).codes);
  CHECK(x.codes != v.GenerateIncremental(cond, c).codes);
}

TEST_CASE("untrained nll is near the uniform bound") {
  const auto v = Vocoder::Initialize(VocoderConfig(), 11);
  ToyCorpusOptions o;
  auto audio = RenderToyUtterance({"ba1", "du2"}, Lang::kMand, o);
  const auto mel = ComputeMel(audio, AudioConfig());
  const auto cond = UpsampleConditioning(mel, 200);
  audio.resize(cond.size(), 0.0);
  const double nll = v.Nll({{SnapTo16Bit(audio), cond}});
  CHECK(std::abs(nll - std::log(65536.0)) <= 1.5);
}

TEST_CASE("vocoder nll gradients match finite differences") {
  auto v = Vocoder::Initialize(TinyConfig(), 21);
  RandomizeBiases(v, 22);
  v.set_precision(Vocoder::Precision::kFloat64);
  Rng rng(23);
  std::vector<VocoderExample> batch;
  for (int b = 0; b < 2; ++b) {
    const auto cond = RandomTrack(rng, 6, 3, 10);
    batch.push_back({RandomGridAudio(rng, cond.size(), 0.5), cond});
  }
  ParamMap grads;
  v.Nll(batch, &grads);
  const double h = 1e-5;
  for (auto& [name, m] : v.mutable_params()) {
    const Mat& g = grads.at(name);
    REQUIRE(g.rows() == m.rows());
    REQUIRE(g.cols() == m.cols());
    std::vector<double> ana, num;
    for (int s = 0; s < std::min<Index>(8, m.size()); ++s) {
      const Index i = static_cast<Index>(rng.Below(static_cast<uint64_t>(m.size())));
      const double keep = m.data()[i];
      m.data()[i] = keep + h;
      const double up = v.Nll(batch);
      m.data()[i] = keep - h;
      const double dn = v.Nll(batch);
      m.data()[i] = keep;
      ana.push_back(g.data()[i]);
      num.push_back((up - dn) / (2 * h));
    }
    double diff = 0.0, scale = 0.0;
    for (size_t i = 0; i < ana.size(); ++i) {
      diff += (ana[i] - num[i]) * (ana[i] - num[i]);
      scale = std::max({scale, ana[i] * ana[i], num[i] * num[i]});
    }
    INFO(name);
    CHECK(std::sqrt(diff) <= 1e-3 * std::sqrt(std::max(scale, 1e-12)) + 1e-9);
  }
}

TEST_CASE("float and double training arithmetic agree") {
  auto v = Vocoder::Initialize(TinyConfig(), 31);
  Rng rng(32);
  const auto cond = RandomTrack(rng, 20, 3, 10);
  const std::vector<VocoderExample> batch = {{RandomGridAudio(rng, cond.size(), 0.4), cond}};
  const double f = v.Nll(batch);
  v.set_precision(Vocoder::Precision::kFloat64);
  CHECK(f == doctest::Approx(v.Nll(batch)).epsilon(1e-4));
}

TEST_CASE("training reduces nll and keeps parameters float exact") {
  auto v = Vocoder::Initialize(TinyConfig(), 41);
  Rng rng(42);
  const auto cond = RandomTrack(rng, 20, 3, 10);
  std::vector<double> audio(static_cast<size_t>(cond.size()));
  for (size_t i = 0; i < audio.size(); ++i) audio[i] = 0.3 * std::sin(0.2 * static_cast<double>(i));
  const std::vector<VocoderExample> batch = {{SnapTo16Bit(audio), cond}};
  Adam adam;
  const double first = v.TrainStep(batch, adam);
  double last = first;
  for (int i = 0; i < 60; ++i) last = v.TrainStep(batch, adam);
  CHECK(last < first);
  for (const auto& [n, m] : v.params()) {
    Mat r = m;
    RoundToFloat(r);
    CHECK(r == m);
  }
  std::vector<double> off_grid = {0.3 / 65535.0};
  ConditioningTrack one;
  one.frames = Mat::Zero(1, 3);
  one.hop = 1;
  CHECK_THROWS_AS(v.Nll({{off_grid, one}}), Error);
}
