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
#include "features.hpp"

#include <algorithm>
#include <complex>
#include <fstream>
#include <mutex>

#include <unsupported/Eigen/FFT>

#include "json.hpp"

namespace lrtts {

void AudioConfig::Validate() const {
  Require(sample_rate > 0 && n_fft > 0 && win > 0 && hop > 0 && n_mels > 0, "audio config: sizes must be positive");
  Require(hop <= win && win <= n_fft, "audio config: requires hop <= win <= n_fft");
  Require(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0, "audio config: requires 0 <= fmin < fmax <= sr/2");
  Require(log_floor > 0.0, "audio config: log_floor must be positive");
}

nlohmann::json AudioConfig::ToJson() const {
  return {{"sample_rate", sample_rate}, {"n_fft", n_fft},   {"win", win},
          {"hop", hop},                 {"n_mels", n_mels}, {"fmin", fmin},
          {"fmax", fmax},               {"log_floor", log_floor}, {"normalize", normalize}};
}

AudioConfig AudioConfig::FromJson(const nlohmann::json& j) {
  AudioConfig c;
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.n_fft = j.value("n_fft", c.n_fft);
  c.win = j.value("win", c.win);
  c.hop = j.value("hop", c.hop);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.fmin = j.value("fmin", c.fmin);
  c.fmax = j.value("fmax", c.fmax);
  c.log_floor = j.value("log_floor", c.log_floor);
  c.normalize = j.value("normalize", c.normalize);
  c.Validate();
  return c;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> MelEdges(const AudioConfig& c) {
  const double lo = HzToMel(c.fmin);
  const double hi = HzToMel(c.fmax);
  std::vector<double> hz(c.n_mels + 2);
  for (int i = 0; i < c.n_mels + 2; ++i) hz[i] = MelToHz(lo + (hi - lo) * i / (c.n_mels + 1));
  return hz;
}

std::vector<double> HannWindow(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

using Complex = std::complex<double>;
using ComplexFrames = std::vector<std::vector<Complex>>;

ComplexFrames Stft(std::span<const double> x, const AudioConfig& c, Index frames) {
  const auto window = HannWindow(c.win);
  Eigen::FFT<double> fft;
  ComplexFrames out(frames);
  std::vector<double> buf(c.n_fft);
  for (Index t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const size_t start = static_cast<size_t>(t) * c.hop;
    for (int i = 0; i < c.win; ++i) {
      const size_t k = start + i;
      buf[i] = k < x.size() ? x[k] * window[i] : 0.0;
    }
    std::vector<Complex> spec;
    fft.fwd(spec, buf);
    spec.resize(c.n_bins());
    out[t] = std::move(spec);
  }
  return out;
}

std::vector<double> Istft(const ComplexFrames& spec, const AudioConfig& c) {
  const auto window = HannWindow(c.win);
  const Index frames = static_cast<Index>(spec.size());
  const size_t len = frames == 0 ? 0 : static_cast<size_t>(frames - 1) * c.hop + c.win;
  std::vector<double> out(len, 0.0);
  std::vector<double> norm(len, 0.0);
  Eigen::FFT<double> fft;
  std::vector<Complex> full(c.n_fft);
  std::vector<double> frame;
  for (Index t = 0; t < frames; ++t) {
    for (int k = 0; k < c.n_bins(); ++k) full[k] = spec[t][k];
    for (int k = c.n_bins(); k < c.n_fft; ++k) full[k] = std::conj(spec[t][c.n_fft - k]);
    fft.inv(frame, full);
    const size_t start = static_cast<size_t>(t) * c.hop;
    for (int i = 0; i < c.win; ++i) {
      out[start + i] += frame[i] * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }
  if (len == 0) return out;
  // Floored so the sparsely covered edges are not blown up.
  const double peak = *std::max_element(norm.begin(), norm.end());
  for (size_t i = 0; i < len; ++i) out[i] /= std::max(norm[i], 0.1 * peak);
  return out;
}

Mat Magnitudes(const ComplexFrames& spec) {
  if (spec.empty()) return Mat();
  Mat m(static_cast<Index>(spec.size()), static_cast<Index>(spec.front().size()));
  for (Index t = 0; t < m.rows(); ++t) {
    for (Index k = 0; k < m.cols(); ++k) m(t, k) = std::abs(spec[t][k]);
  }
  return m;
}

}  // namespace

Mat MelFilterbank(const AudioConfig& c) {
  c.Validate();
  const auto edges = MelEdges(c);
  Mat fb = Mat::Zero(c.n_mels, c.n_bins());
  for (int m = 0; m < c.n_mels; ++m) {
    const double lo = edges[m];
    const double mid = edges[m + 1];
    const double hi = edges[m + 2];
    for (int k = 0; k < c.n_bins(); ++k) {
      const double f = static_cast<double>(k) * c.sample_rate / c.n_fft;
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

std::vector<double> MelCenterFrequencies(const AudioConfig& c) {
  const auto edges = MelEdges(c);
  return {edges.begin() + 1, edges.end() - 1};
}

Index NumFrames(Index num_samples, const AudioConfig& c) {
  if (num_samples < c.win) return 0;
  return 1 + (num_samples - c.win) / c.hop;
}

Mat PowerSpectrogram(std::span<const double> samples, const AudioConfig& c) {
  const Index frames = NumFrames(static_cast<Index>(samples.size()), c);
  const Mat mag = Magnitudes(Stft(samples, c, frames));
  return mag.array().square();
}

MelSpectrogram ComputeMel(std::span<const double> samples, const AudioConfig& c) {
  c.Validate();
  if (static_cast<Index>(samples.size()) < c.win) {
    Fail(ErrorKind::kInvalidArgument, "audio shorter than one analysis window (" + std::to_string(samples.size()) +
                                          " < " + std::to_string(c.win) + " samples)");
  }
  const Mat power = PowerSpectrogram(samples, c);
  const Mat fb = MelFilterbank(c);
  MelSpectrogram mel;
  mel.hop_s = c.hop_seconds();
  mel.frames = (power * fb.transpose()).array().max(c.log_floor).log();
  return mel;
}

Mat MelToLinearMagnitude(const MelSpectrogram& mel, const AudioConfig& c) {
  const Mat fb = MelFilterbank(c);
  const Mat pinv = fb.completeOrthogonalDecomposition().pseudoInverse();  // bins x mels
  const Mat power_mel = mel.frames.array().exp();
  const Mat power = (power_mel * pinv.transpose()).cwiseMax(0.0);
  return power.array().sqrt();
}

std::vector<double> GriffinLim(const MelSpectrogram& mel, const AudioConfig& c, int n_iters, uint64_t seed) {
  c.Validate();
  Require(mel.num_mels() == c.n_mels, "griffin-lim: mel has " + std::to_string(mel.num_mels()) + " bins, expected " +
                                          std::to_string(c.n_mels));
  const Index frames = mel.num_frames();
  if (frames == 0) return {};
  const Mat mag = MelToLinearMagnitude(mel, c);
  Rng rng(seed);
  ComplexFrames spec(frames, std::vector<Complex>(c.n_bins()));
  for (Index t = 0; t < frames; ++t) {
    for (int k = 0; k < c.n_bins(); ++k) spec[t][k] = std::polar(mag(t, k), 2.0 * M_PI * rng.Uniform());
  }
  std::vector<double> x = Istft(spec, c);
  for (int it = 0; it < n_iters; ++it) {
    const ComplexFrames est = Stft(x, c, frames);
    for (Index t = 0; t < frames; ++t) {
      for (int k = 0; k < c.n_bins(); ++k) {
        const double a = std::abs(est[t][k]);
        const Complex phase = a > 1e-12 ? est[t][k] / a : Complex(1.0, 0.0);
        spec[t][k] = mag(t, k) * phase;
      }
    }
    x = Istft(spec, c);
  }
  return x;
}

double SpectralConvergence(std::span<const double> samples, const Mat& target, const AudioConfig& c) {
  const Mat mag = Magnitudes(Stft(samples, c, target.rows()));
  const double denom = target.norm();
  return denom > 0.0 ? (mag - target).norm() / denom : (mag - target).norm();
}

void SaveMel(const std::string& path, const MelSpectrogram& mel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write mel file " + path);
  std::vector<float> flat(static_cast<size_t>(mel.frames.size()));
  for (Index t = 0; t < mel.num_frames(); ++t) {
    for (Index m = 0; m < mel.num_mels(); ++m) flat[t * mel.num_mels() + m] = static_cast<float>(mel.frames(t, m));
  }
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(float)));
  nlohmann::json header = {{"frames", mel.num_frames()}, {"n_mels", mel.num_mels()}, {"hop_s", mel.hop_s}};
  std::ofstream side(path + ".json");
  if (!side) Fail(ErrorKind::kIo, "cannot write mel header " + path + ".json");
  side << header.dump() << "\n";
}

MelSpectrogram LoadMel(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) Fail(ErrorKind::kIo, "cannot open mel header " + path + ".json");
  nlohmann::json header;
  try {
    side >> header;
  } catch (const std::exception& e) {
    Fail(ErrorKind::kCorrupt, path + ".json: " + e.what());
  }
  const Index frames = header.at("frames").get<Index>();
  const Index n_mels = header.at("n_mels").get<Index>();
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open mel file " + path);
  std::vector<float> flat(static_cast<size_t>(frames * n_mels));
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(float))) {
    Fail(ErrorKind::kCorrupt, path + ": expected " + std::to_string(frames) + "x" + std::to_string(n_mels) + " floats");
  }
  MelSpectrogram mel;
  mel.hop_s = header.value("hop_s", 0.0125);
  mel.frames.resize(frames, n_mels);
  for (Index i = 0; i < frames * n_mels; ++i) mel.frames.data()[i] = flat[static_cast<size_t>(i)];
  return mel;
}

}  // namespace lrtts
