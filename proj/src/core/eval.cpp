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
#include "eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace lrtts {

RowVec MelCepstrum(const RowVec& x) {
  const Index n = x.size();
  RowVec c(n);
  for (Index k = 0; k < n; ++k) {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += x(i) * std::cos(M_PI * static_cast<double>(k) * (2.0 * i + 1.0) / (2.0 * n));
    c(k) = s * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return c;
}

double Mcd(const MelSpectrogram& ref, const MelSpectrogram& hyp, int n_coeffs) {
  if (ref.frames.rows() != hyp.frames.rows()) {
    Fail(ErrorKind::kShape, "mcd: frame count mismatch (" + std::to_string(ref.frames.rows()) + " vs " +
                                std::to_string(hyp.frames.rows()) + ")");
  }
  Require(ref.frames.cols() == hyp.frames.cols(), "mcd: mel width mismatch");
  Require(ref.frames.rows() > 0, "mcd: no frames");
  Require(n_coeffs >= 1 && n_coeffs < ref.frames.cols(), "mcd: coefficient count out of range");
  const double k = 10.0 / std::log(10.0) * std::sqrt(2.0);
  double total = 0.0;
  for (Index t = 0; t < ref.frames.rows(); ++t) {
    const RowVec d = MelCepstrum(ref.frames.row(t)) - MelCepstrum(hyp.frames.row(t));
    total += k * d.segment(1, n_coeffs).norm();
  }
  return total / static_cast<double>(ref.frames.rows());
}

AlignmentScores AlignmentDiagnostics(const Mat& a) {
  AlignmentScores s;
  if (a.rows() == 0 || a.cols() == 0) return {0.0, 0.0};
  // A step counts when its argmax is at most one token behind the furthest
  // position reached so far; one-token jitter passes, drifting back does not.
  Index forward = 0;
  Index reached = 0;
  for (Index t = 0; t < a.rows(); ++t) {
    Index arg;
    a.row(t).maxCoeff(&arg);
    if (t > 0 && arg + 1 >= reached) ++forward;
    reached = std::max(reached, arg);
  }
  s.monotonicity = a.rows() == 1 ? 1.0 : static_cast<double>(forward) / static_cast<double>(a.rows() - 1);
  Index covered = 0;
  for (Index j = 0; j < a.cols(); ++j) covered += a.col(j).maxCoeff() > 0.1 ? 1 : 0;
  s.coverage = static_cast<double>(covered) / static_cast<double>(a.cols());
  return s;
}

nlohmann::json EvalReport::Aggregate() const {
  long ok = 0;
  long stopped = 0;
  double mcd = 0.0;
  double mono = 0.0;
  double cov = 0.0;
  for (const auto& r : rows) {
    if (!r.ok()) continue;
    ++ok;
    stopped += r.stopped ? 1 : 0;
    mcd += r.mcd_db;
    mono += r.monotonicity;
    cov += r.coverage;
  }
  nlohmann::ordered_json j;
  j["utterances"] = rows.size();
  j["succeeded"] = ok;
  j["failed"] = static_cast<long>(rows.size()) - ok;
  j["stopped_naturally"] = stopped;
  j["mean_mcd_db"] = ok ? mcd / ok : 0.0;
  j["mean_monotonicity"] = ok ? mono / ok : 0.0;
  j["mean_coverage"] = ok ? cov / ok : 0.0;
  return j;
}

void EvalReport::WriteCsv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) Fail(ErrorKind::kIo, "cannot write report " + path);
  f << "utt_id,mcd_db,monotonicity,coverage,stopped,status\n";
  f << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    f << r.utt_id << ',' << r.mcd_db << ',' << r.monotonicity << ',' << r.coverage << ',' << (r.stopped ? 1 : 0)
      << ',' << status << '\n';
  }
}

void EvalReport::WriteJson(const std::string& path) const {
  std::ofstream f(path);
  if (!f) Fail(ErrorKind::kIo, "cannot write report " + path);
  f << Aggregate().dump(2) << '\n';
}

void WriteAlignmentCsv(const std::string& path, const Mat& a) {
  std::ofstream f(path);
  if (!f) Fail(ErrorKind::kIo, "cannot write alignment " + path);
  f << std::setprecision(6);
  for (Index t = 0; t < a.rows(); ++t) {
    for (Index j = 0; j < a.cols(); ++j) f << (j ? "," : "") << a(t, j);
    f << '\n';
  }
}

}  // namespace lrtts
