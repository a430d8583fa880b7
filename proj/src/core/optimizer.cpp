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
#include "optimizer.hpp"

namespace lrtts {

double GlobalNorm(const ParamMap& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

double Adam::Step(ParamMap& params, const ParamMap& grads) {
  const double norm = GlobalNorm(grads);
  if (!std::isfinite(norm)) Fail(ErrorKind::kNumeric, "non-finite gradient norm");
  const double clip = (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Mat g = git->second * clip;
    auto [mit, m_new] = m_.try_emplace(name, Mat::Zero(p.rows(), p.cols()));
    auto [vit, v_new] = v_.try_emplace(name, Mat::Zero(p.rows(), p.cols()));
    Mat& m = mit->second;
    Mat& v = vit->second;
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const auto mhat = m.array() / bc1;
    const auto vhat = v.array() / bc2;
    p.array() -= config_.learning_rate * mhat / (vhat.sqrt() + config_.epsilon);
    RoundToFloat(p);
  }
  return norm;
}

}  // namespace lrtts
