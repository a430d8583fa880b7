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
#include <vector>

#include "common.hpp"

namespace lrtts {

// Discretized mixture of logistics over the 65536-point grid
// x_k = -1 + 2k/65535, k = 0..65535, bin half-width 1/65535.
inline constexpr int kGridPoints = 65536;
inline constexpr double kGridHalfWidth = 1.0 / 65535.0;
inline constexpr double kLogScaleFloor = -7.0;

double GridValue(int k);
// Grid index of x; throws when x is not within 1e-9 of a grid point.
int GridIndex(double x);
// Nearest grid index, clamped to the grid.
int NearestGridIndex(double x);
// 16-bit PCM code c sits at grid index c + 32768.
inline int CodeToGridIndex(int code) { return code + 32768; }
inline int GridIndexToCode(int k) { return k - 32768; }

// View over one sample's 3K parameters: logits, means, log-scales.
struct MolParams {
  std::span<const double> logits;
  std::span<const double> means;
  std::span<const double> log_scales;  // floor applied by the consumer
  static MolParams FromRow(const double* row, int k);
  int size() const { return static_cast<int>(logits.size()); }
};

double MolLogProb(double x, const MolParams& p);
double MolLogProbAtIndex(int k, const MolParams& p);

// -log p(x) and its gradient w.r.t. the 3K raw outputs (logits, means,
// log-scales before flooring); gradient through the floor is zero.
double MolNllWithGrad(int k, const MolParams& p, double* grad);

// Component by categorical draw over softmax(logits), value by logistic
// inverse CDF with u in (1e-5, 1 - 1e-5), clamped to [-1, 1].
double SampleMol(const MolParams& p, Rng& rng);
// Mean of the heaviest component, clamped.
double ModeMeanMol(const MolParams& p);

}  // namespace lrtts
