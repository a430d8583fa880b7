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

#include <map>
#include <string>

#include "common.hpp"

namespace lrtts {

using ParamMap = std::map<std::string, Mat>;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // global gradient-norm clip; <= 0 disables
};

// Adaptive-moment optimizer with global-norm clipping. After each update the
// parameters are rounded to float precision so checkpoints stay lossless.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Returns the gradient norm before clipping.
  double Step(ParamMap& params, const ParamMap& grads);

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  long steps() const { return step_; }

 private:
  AdamConfig config_;
  long step_ = 0;
  ParamMap m_;
  ParamMap v_;
};

double GlobalNorm(const ParamMap& grads);

}  // namespace lrtts
