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

#include <string>
#include <vector>

#include "features.hpp"
#include "json.hpp"

namespace lrtts {

// Orthonormal DCT-II of one log-mel frame.
RowVec MelCepstrum(const RowVec& log_mel);

// Mean over frames of (10 / ln 10) * sqrt(2) * ||c[1..13] - c'[1..13]||.
double Mcd(const MelSpectrogram& ref, const MelSpectrogram& hyp, int n_coeffs = 13);

struct AlignmentScores {
  double monotonicity = 1.0;  // share of steps whose argmax is at most one behind the furthest reached
  double coverage = 0.0;      // share of encoder positions with column max > 0.1
};

// `alignments` is decoder_steps x encoder_steps.
AlignmentScores AlignmentDiagnostics(const Mat& alignments);

struct EvalRow {
  std::string utt_id;
  double mcd_db = 0.0;
  double monotonicity = 0.0;
  double coverage = 0.0;
  bool stopped = false;
  std::string status = "ok";  // "ok" or "failed: <reason>"
  bool ok() const { return status == "ok"; }
};

struct EvalReport {
  std::vector<EvalRow> rows;

  nlohmann::json Aggregate() const;
  // utt_id,mcd_db,monotonicity,coverage,stopped,status
  void WriteCsv(const std::string& path) const;
  void WriteJson(const std::string& path) const;
};

void WriteAlignmentCsv(const std::string& path, const Mat& alignments);

}  // namespace lrtts
