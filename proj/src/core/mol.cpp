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
#include "mol.hpp"

#include <algorithm>
#include <limits>

namespace lrtts {

namespace {

double Softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double LogSumExp(const double* v, int n) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// log of the mass a logistic (mu, s) puts on the bin around grid index k,
// plus the derivatives with respect to mu and the floored log-scale.
struct BinMass {
  double log_p;
  double d_mu;
  double d_log_s;
};

BinMass ComponentBin(int k, double mu, double log_s) {
  const double x = GridValue(k);
  const double inv_s = std::exp(-log_s);
  const double a = (x + kGridHalfWidth - mu) * inv_s;  // upper edge
  const double b = (x - kGridHalfWidth - mu) * inv_s;  // lower edge
  BinMass r{};
  if (k == 0) {
    // CDF from -inf to the upper edge.
    r.log_p = -Softplus(-a);
    const double da = Sigmoid(-a);
    r.d_mu = -da * inv_s;
    r.d_log_s = -da * a;
  } else if (k == kGridPoints - 1) {
    r.log_p = -Softplus(b);
    const double db = -Sigmoid(b);
    r.d_mu = -db * inv_s;
    r.d_log_s = -db * b;
  } else {
    // log(sigma(a) - sigma(b)) = -softplus(-a) - softplus(b) + log(1 - e^(b - a))
    const double em = std::expm1(a - b);
    r.log_p = -Softplus(-a) - Softplus(b) + std::log(-std::expm1(b - a));
    const double da = Sigmoid(-a) + 1.0 / em;
    const double db = -Sigmoid(b) - 1.0 / em;
    r.d_mu = -(da + db) * inv_s;
    r.d_log_s = -(da * a + db * b);
  }
  return r;
}

}  // namespace

double GridValue(int k) { return -1.0 + 2.0 * static_cast<double>(k) / 65535.0; }

int NearestGridIndex(double x) {
  const double k = std::round((x + 1.0) * 65535.0 / 2.0);
  return static_cast<int>(std::clamp(k, 0.0, 65535.0));
}

int GridIndex(double x) {
  Require(std::isfinite(x) && x >= -1.0 - 1e-12 && x <= 1.0 + 1e-12, "mol: sample outside [-1, 1]");
  const int k = NearestGridIndex(x);
  if (std::abs(GridValue(k) - x) > 1e-9) {
    Fail(ErrorKind::kInvalidArgument, "mol: value " + std::to_string(x) + " is not on the 65536-point grid");
  }
  return k;
}

MolParams MolParams::FromRow(const double* row, int k) {
  return {std::span<const double>(row, static_cast<size_t>(k)), std::span<const double>(row + k, static_cast<size_t>(k)),
          std::span<const double>(row + 2 * k, static_cast<size_t>(k))};
}

double MolLogProb(double x, const MolParams& p) { return MolLogProbAtIndex(GridIndex(x), p); }

double MolLogProbAtIndex(int k, const MolParams& p) {
  const int n = p.size();
  std::vector<double> terms(static_cast<size_t>(n));
  const double lse_w = LogSumExp(p.logits.data(), n);
  for (int i = 0; i < n; ++i) {
    const double ls = std::max(p.log_scales[i], kLogScaleFloor);
    terms[i] = p.logits[i] - lse_w + ComponentBin(k, p.means[i], ls).log_p;
  }
  return LogSumExp(terms.data(), n);
}

double MolNllWithGrad(int k, const MolParams& p, double* grad) {
  const int n = p.size();
  double terms[64];
  BinMass bins[64];
  Require(n <= 64, "mol: at most 64 mixture components");
  const double lse_w = LogSumExp(p.logits.data(), n);
  for (int i = 0; i < n; ++i) {
    const double ls = std::max(p.log_scales[i], kLogScaleFloor);
    bins[i] = ComponentBin(k, p.means[i], ls);
    terms[i] = p.logits[i] - lse_w + bins[i].log_p;
  }
  const double log_p = LogSumExp(terms, n);
  for (int i = 0; i < n; ++i) {
    const double resp = std::exp(terms[i] - log_p);
    const double w = std::exp(p.logits[i] - lse_w);
    grad[i] = w - resp;
    grad[n + i] = -resp * bins[i].d_mu;
    grad[2 * n + i] = p.log_scales[i] > kLogScaleFloor ? -resp * bins[i].d_log_s : 0.0;
  }
  return -log_p;
}

double SampleMol(const MolParams& p, Rng& rng) {
  const int n = p.size();
  const double lse_w = LogSumExp(p.logits.data(), n);
  double u = rng.Uniform();
  int comp = n - 1;
  for (int i = 0; i < n; ++i) {
    u -= std::exp(p.logits[i] - lse_w);
    if (u < 0.0) {
      comp = i;
      break;
    }
  }
  const double v = rng.Uniform(1e-5, 1.0 - 1e-5);
  const double s = std::exp(std::max(p.log_scales[comp], kLogScaleFloor));
  return std::clamp(p.means[comp] + s * (std::log(v) - std::log1p(-v)), -1.0, 1.0);
}

double ModeMeanMol(const MolParams& p) {
  const auto it = std::max_element(p.logits.begin(), p.logits.end());
  return std::clamp(p.means[static_cast<size_t>(it - p.logits.begin())], -1.0, 1.0);
}

}  // namespace lrtts
