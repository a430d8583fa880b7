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
#include <fstream>

#include "doctest.h"
#include "eval.hpp"
#include "test_util.hpp"

using namespace lrtts;

namespace {

MelSpectrogram RandomMel(Rng& rng, Index frames, Index channels = 80) {
  MelSpectrogram m;
  m.frames = Mat(frames, channels);
  for (Index i = 0; i < m.frames.size(); ++i) m.frames.data()[i] = rng.Uniform(-10.0, 0.0);
  return m;
}

// Direct cosine sum, written independently of MelCepstrum.
double OracleMcd(const MelSpectrogram& a, const MelSpectrogram& b) {
  const Index n = a.frames.cols();
  double total = 0.0;
  for (Index t = 0; t < a.frames.rows(); ++t) {
    double sq = 0.0;
    for (Index k = 1; k <= 13; ++k) {
      double d = 0.0;
      for (Index i = 0; i < n; ++i) {
        d += (a.frames(t, i) - b.frames(t, i)) * std::cos(M_PI * k * (i + 0.5) / n);
      }
      d *= std::sqrt(2.0 / n);
      sq += d * d;
    }
    total += 10.0 / std::log(10.0) * std::sqrt(2.0 * sq);
  }
  return total / a.frames.rows();
}

}  // namespace

TEST_CASE("mel cepstrum is orthonormal") {
  Rng rng(3);
  RowVec x(80);
  for (Index i = 0; i < 80; ++i) x(i) = rng.Normal();
  CHECK(MelCepstrum(x).norm() == doctest::Approx(x.norm()).epsilon(1e-12));
  RowVec c = RowVec::Constant(80, 2.5);
  const RowVec cc = MelCepstrum(c);
  CHECK(cc(0) == doctest::Approx(2.5 * std::sqrt(80.0)));
  CHECK(cc.tail(79).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mcd") {
  Rng rng(8);
  const auto a = RandomMel(rng, 12);
  CHECK(Mcd(a, a) == 0.0);

  MelSpectrogram shifted = a;
  shifted.frames.array() += 1.7;
  CHECK(Mcd(a, shifted) < 1e-9);

  const auto b = RandomMel(rng, 12);
  CHECK(Mcd(a, b) > 0.0);
  CHECK(Mcd(a, b) == doctest::Approx(Mcd(b, a)));
  CHECK(Mcd(a, b) == doctest::Approx(OracleMcd(a, b)).epsilon(1e-10));

  const auto noise = RandomMel(rng, 12);
  double prev = 0.0;
  for (double eps : {0.01, 0.1, 0.5, 2.0}) {
    MelSpectrogram p = a;
    p.frames += eps * noise.frames;
    const double d = Mcd(a, p);
    CHECK(d > prev);
    prev = d;
  }

  try {
    Mcd(a, RandomMel(rng, 11));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
}

TEST_CASE("alignment diagnostics") {
  SUBCASE("diagonal") {
    const auto s = AlignmentDiagnostics(Mat::Identity(10, 10));
    CHECK(s.monotonicity == 1.0);
    CHECK(s.coverage == 1.0);
  }
  SUBCASE("reversed diagonal") {
    const Mat a = Mat::Identity(10, 10).rowwise().reverse();
    const auto s = AlignmentDiagnostics(a);
    CHECK(s.monotonicity == doctest::Approx(1.0 / 9.0));
    CHECK(s.coverage == 1.0);
  }
  SUBCASE("uniform attention over many tokens covers nothing") {
    const auto s = AlignmentDiagnostics(Mat::Constant(20, 10, 0.1));
    CHECK(s.coverage == 0.0);
  }
  SUBCASE("one token of jitter passes, a drift back does not") {
    Mat a = Mat::Zero(6, 6);
    for (int t : {0, 1, 2, 3, 4, 5}) a(t, std::vector<int>{0, 1, 2, 1, 3, 0}[t]) = 1.0;
    CHECK(AlignmentDiagnostics(a).monotonicity == doctest::Approx(4.0 / 5.0));
  }
  SUBCASE("single step") {
    CHECK(AlignmentDiagnostics(Mat::Constant(1, 3, 1.0 / 3)).monotonicity == 1.0);
  }
  SUBCASE("row scaling leaves the scores alone") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      Mat a(15, 7);
      for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.Uniform(0.0, 1.0);
      for (Index t = 0; t < a.rows(); ++t) a.row(t) /= a.row(t).sum();
      const auto s = AlignmentDiagnostics(a);
      CHECK(s.monotonicity >= 0.0);
      CHECK(s.monotonicity <= 1.0);
      Mat b = a;
      for (Index t = 0; t < b.rows(); ++t) b.row(t) *= 0.5 + t;
      CHECK(AlignmentDiagnostics(b).monotonicity == s.monotonicity);
    }
  }
}

TEST_CASE("report files") {
  test::TempDir dir("report");
  EvalReport r;
  r.rows.push_back({"u1", 2.0, 1.0, 0.5, true, "ok"});
  r.rows.push_back({"u2", 4.0, 0.5, 1.0, false, "ok"});
  r.rows.push_back({"u3", 0.0, 0.0, 0.0, false, "failed: token 'x', not known"});
  const auto j = r.Aggregate();
  CHECK(j["utterances"] == 3);
  CHECK(j["failed"] == 1);
  CHECK(j["stopped_naturally"] == 1);
  CHECK(j["mean_mcd_db"].get<double>() == doctest::Approx(3.0));
  CHECK(j["mean_monotonicity"].get<double>() == doctest::Approx(0.75));
  r.WriteCsv(dir / "r.csv");
  r.WriteJson(dir / "r.json");
  std::ifstream csv(dir / "r.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
  }
  CHECK(lines == 4);
  std::ifstream js(dir / "r.json");
  CHECK(nlohmann::json::parse(js) == j);

  EvalReport empty;
  CHECK(empty.Aggregate()["mean_mcd_db"] == 0.0);
}
