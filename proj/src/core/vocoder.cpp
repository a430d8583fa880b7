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
#include "vocoder.hpp"

#include <algorithm>
#include <sstream>

#include "audio.hpp"

namespace lrtts {

std::vector<int> VocoderConfig::DefaultDilations(int layers, int cycles) {
  std::vector<int> d;
  if (layers <= 0 || cycles <= 0 || layers % cycles != 0) return d;
  const int per_cycle = layers / cycles;
  for (int c = 0; c < cycles; ++c) {
    for (int i = 0; i < per_cycle; ++i) d.push_back(1 << i);
  }
  return d;
}

void VocoderConfig::Validate() const {
  Require(layers >= 1, "vocoder config: layers must be positive");
  Require(kernel >= 2, "vocoder config: kernel must be at least 2");
  Require(static_cast<int>(dilations.size()) == layers, "vocoder config: need one dilation per layer");
  for (int d : dilations) Require(d >= 1, "vocoder config: dilations must be >= 1");
  Require(residual_channels > 0 && skip_channels > 0 && conditioning_channels > 0,
          "vocoder config: channel counts must be positive");
  Require(gate_channels > 0 && gate_channels % 2 == 0, "vocoder config: gate_channels must be positive and even");
  Require(n_mixtures >= 1 && n_mixtures <= 64, "vocoder config: n_mixtures must lie in [1, 64]");
  Require(hop >= 1 && sample_rate > 0, "vocoder config: invalid hop or sample rate");
}

nlohmann::json VocoderConfig::ToJson() const {
  return {{"layers", layers},
          {"kernel", kernel},
          {"dilations", dilations},
          {"residual_channels", residual_channels},
          {"gate_channels", gate_channels},
          {"skip_channels", skip_channels},
          {"conditioning_channels", conditioning_channels},
          {"n_mixtures", n_mixtures},
          {"sample_rate", sample_rate},
          {"hop", hop}};
}

VocoderConfig VocoderConfig::FromJson(const nlohmann::json& j) {
  VocoderConfig c;
  c.layers = j.value("layers", c.layers);
  c.kernel = j.value("kernel", c.kernel);
  if (j.contains("dilations")) {
    c.dilations = j.at("dilations").get<std::vector<int>>();
  } else if (j.contains("dilation_cycles")) {
    c.dilations = DefaultDilations(c.layers, j.at("dilation_cycles").get<int>());
  } else if (c.layers != 24) {
    c.dilations = DefaultDilations(c.layers, 3);
  }
  c.residual_channels = j.value("residual_channels", c.residual_channels);
  c.gate_channels = j.value("gate_channels", c.gate_channels);
  c.skip_channels = j.value("skip_channels", c.skip_channels);
  c.conditioning_channels = j.value("conditioning_channels", c.conditioning_channels);
  c.n_mixtures = j.value("n_mixtures", c.n_mixtures);
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.hop = j.value("hop", c.hop);
  return c;
}

int ReceptiveField(const VocoderConfig& config) {
  config.Validate();
  int sum = 0;
  for (int d : config.dilations) sum += d;
  return 1 + (config.kernel - 1) * sum;
}

ConditioningTrack UpsampleConditioning(const MelSpectrogram& mel, int hop) {
  Require(hop >= 1, "upsample_conditioning: hop must be positive");
  Require(mel.frames.allFinite(), "upsample_conditioning: mel contains non-finite values");
  return {mel.frames, hop};
}

Mat ExpandTrack(const ConditioningTrack& track) {
  Mat out(track.size(), track.channels());
  for (Index k = 0; k < out.rows(); ++k) out.row(k) = track.row(k);
  return out;
}

std::vector<double> ShiftRight(const std::vector<double>& audio) {
  std::vector<double> in(audio.size(), 0.0);
  for (size_t i = 1; i < audio.size(); ++i) in[i] = audio[i - 1];
  return in;
}

std::vector<double> SnapTo16Bit(const std::vector<double>& samples) {
  std::vector<double> out(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) out[i] = Dequantize16(Quantize16(samples[i]));
  return out;
}

std::map<std::string, std::pair<Index, Index>> VocoderParamShapes(const VocoderConfig& c) {
  c.Validate();
  std::map<std::string, std::pair<Index, Index>> s;
  const Index R = c.residual_channels;
  const Index Z = c.gate_channels;
  const Index G = Z / 2;
  const Index S = c.skip_channels;
  s["input.w"] = {1, R};
  s["input.b"] = {1, R};
  for (int l = 0; l < c.layers; ++l) {
    const std::string n = "layer" + std::to_string(l);
    s[n + ".conv.w"] = {c.kernel * R, Z};
    s[n + ".conv.b"] = {1, Z};
    s[n + ".cond.w"] = {c.conditioning_channels, Z};
    s[n + ".skip.w"] = {G, S};
    s[n + ".skip.b"] = {1, S};
    if (l + 1 < c.layers) {
      s[n + ".res.w"] = {G, R};
      s[n + ".res.b"] = {1, R};
    }
  }
  s["out1.w"] = {S, S};
  s["out1.b"] = {1, S};
  s["out2.w"] = {S, c.output_channels()};
  s["out2.b"] = {1, c.output_channels()};
  return s;
}

Vocoder::Vocoder(VocoderConfig config, ParamMap params) : config_(std::move(config)), params_(std::move(params)) {
  const auto shapes = VocoderParamShapes(config_);
  for (const auto& [name, shape] : shapes) {
    auto it = params_.find(name);
    if (it == params_.end()) Fail(ErrorKind::kShape, "vocoder: missing parameter " + name);
    if (it->second.rows() != shape.first || it->second.cols() != shape.second) {
      std::ostringstream msg;
      msg << "vocoder: parameter " << name << " is " << it->second.rows() << "x" << it->second.cols()
          << ", config implies " << shape.first << "x" << shape.second;
      Fail(ErrorKind::kShape, msg.str());
    }
  }
  if (params_.size() != shapes.size()) Fail(ErrorKind::kShape, "vocoder: unexpected extra parameters");
}

Vocoder Vocoder::Initialize(const VocoderConfig& config, uint64_t seed) {
  Rng rng(seed);
  ParamMap params;
  for (const auto& [name, shape] : VocoderParamShapes(config)) {
    Mat m = Mat::Zero(shape.first, shape.second);
    const bool is_bias = name.compare(name.size() - 2, 2, ".b") == 0;
    if (!is_bias) {
      double bound = std::sqrt(6.0 / static_cast<double>(shape.first + shape.second));
      // Waveform samples are small and log-mels large; rescale both input
      // projections so neither swamps the gates at the start.
      if (name == "input.w") bound *= 10.0;
      if (name.size() > 7 && name.compare(name.size() - 7, 7, ".cond.w") == 0) bound *= 0.05;
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(-bound, bound);
    } else if (name == "out2.b") {
      // Log-scales start at e^-3 instead of 1.
      for (int k = 2 * config.n_mixtures; k < 3 * config.n_mixtures; ++k) m(0, k) = -3.0;
    }
    RoundToFloat(m);
    params.emplace(name, std::move(m));
  }
  return Vocoder(config, std::move(params));
}

namespace {

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Parallel pass at precision T. Training runs in float; the double
// instantiation backs ForwardParallel and gradient checks.
template <typename T>
class ParallelNet {
 public:
  using M = MatT<T>;

  ParallelNet(const VocoderConfig& config, const ParamMap& params) : c_(config) {
    for (const auto& [name, m] : params) p_.emplace(name, m.template cast<T>());
  }

  M Forward(const std::vector<double>& audio_in, const ConditioningTrack& cond, bool keep) {
    const Index N = static_cast<Index>(audio_in.size());
    const Index R = c_.residual_channels;
    const Index G = c_.gate_channels / 2;
    const T res_scale = static_cast<T>(std::sqrt(0.5));
    x_ = Eigen::Map<const Eigen::VectorXd>(audio_in.data(), N).cast<T>();
    frames_ = cond.frames.cast<T>();
    hop_ = cond.hop;

    M h = x_ * P("input.w");
    h.rowwise() += P("input.b").row(0);
    M skip = M::Zero(N, c_.skip_channels);
    h_.clear();
    t_.clear();
    s_.clear();
    for (int l = 0; l < c_.layers; ++l) {
      const std::string n = "layer" + std::to_string(l);
      const M& w = P(n + ".conv.w");
      const Index d = c_.dilations[l];
      M z = h * w.topRows(R);
      z.rowwise() += P(n + ".conv.b").row(0);
      for (int j = 1; j < c_.kernel; ++j) {
        const Index off = j * d;
        if (off >= N) break;
        z.bottomRows(N - off).noalias() += h.topRows(N - off) * w.middleRows(j * R, R);
      }
      const M proj = frames_ * P(n + ".cond.w");
      for (Index t = 0; t < N; ++t) z.row(t) += proj.row(t / hop_);
      M t = z.leftCols(G).array().tanh().matrix();
      M s = (T(1) / (T(1) + (-z.rightCols(G).array()).exp())).matrix();
      const M g = t.cwiseProduct(s);
      skip.noalias() += g * P(n + ".skip.w");
      skip.rowwise() += P(n + ".skip.b").row(0);
      M h_next;
      if (l + 1 < c_.layers) {
        h_next = g * P(n + ".res.w");
        h_next.rowwise() += P(n + ".res.b").row(0);
        h_next = (h_next + h) * res_scale;
      }
      if (keep) {
        h_.push_back(std::move(h));
        t_.push_back(std::move(t));
        s_.push_back(std::move(s));
      }
      h = std::move(h_next);
    }
    skip *= static_cast<T>(std::sqrt(1.0 / c_.layers));
    M o1 = skip.cwiseMax(T(0)) * P("out1.w");
    o1.rowwise() += P("out1.b").row(0);
    M out = o1.cwiseMax(T(0)) * P("out2.w");
    out.rowwise() += P("out2.b").row(0);
    if (keep) {
      skip_ = std::move(skip);
      o1_ = std::move(o1);
    }
    return out;
  }

  // Requires a preceding Forward(..., keep = true). Adds into `grads`.
  void Backward(const M& d_out, ParamMap& grads) {
    const Index N = d_out.rows();
    const Index R = c_.residual_channels;
    const Index G = c_.gate_channels / 2;
    const T res_scale = static_cast<T>(std::sqrt(0.5));
    auto acc = [&grads](const std::string& name, const M& g) {
      auto it = grads.find(name);
      if (it == grads.end()) {
        grads.emplace(name, g.template cast<double>());
      } else {
        it->second += g.template cast<double>();
      }
    };

    const M r2 = o1_.cwiseMax(T(0));
    acc("out2.w", r2.transpose() * d_out);
    acc("out2.b", d_out.colwise().sum());
    const M d_o1 = (d_out * P("out2.w").transpose()).cwiseProduct((o1_.array() > T(0)).template cast<T>().matrix());
    const M r1 = skip_.cwiseMax(T(0));
    acc("out1.w", r1.transpose() * d_o1);
    acc("out1.b", d_o1.colwise().sum());
    const M d_skip = (d_o1 * P("out1.w").transpose()).cwiseProduct((skip_.array() > T(0)).template cast<T>().matrix()) *
                     static_cast<T>(std::sqrt(1.0 / c_.layers));
    const M d_skip_bias = d_skip.colwise().sum();

    M d_h_next;
    for (int l = c_.layers - 1; l >= 0; --l) {
      const std::string n = "layer" + std::to_string(l);
      const M& h = h_[l];
      const M& t = t_[l];
      const M& s = s_[l];
      const M g = t.cwiseProduct(s);
      M d_g = d_skip * P(n + ".skip.w").transpose();
      acc(n + ".skip.w", g.transpose() * d_skip);
      acc(n + ".skip.b", d_skip_bias);
      M d_h;
      if (l + 1 < c_.layers) {
        const M d_res = d_h_next * res_scale;
        d_g.noalias() += d_res * P(n + ".res.w").transpose();
        acc(n + ".res.w", g.transpose() * d_res);
        acc(n + ".res.b", d_res.colwise().sum());
        d_h = d_res;
      } else {
        d_h = M::Zero(N, R);
      }
      M d_z(N, 2 * G);
      d_z.leftCols(G) = d_g.cwiseProduct(s).array() * (T(1) - t.array().square());
      d_z.rightCols(G) = d_g.cwiseProduct(t).array() * s.array() * (T(1) - s.array());
      acc(n + ".conv.b", d_z.colwise().sum());
      // Conditioning gradient gathered back to frame rate.
      M d_frames = M::Zero(frames_.rows(), 2 * G);
      for (Index i = 0; i < N; ++i) d_frames.row(i / hop_) += d_z.row(i);
      acc(n + ".cond.w", frames_.transpose() * d_frames);
      const M& w = P(n + ".conv.w");
      M d_w = M::Zero(w.rows(), w.cols());
      const Index d = c_.dilations[l];
      d_w.topRows(R) = h.transpose() * d_z;
      d_h.noalias() += d_z * w.topRows(R).transpose();
      for (int j = 1; j < c_.kernel; ++j) {
        const Index off = j * d;
        if (off >= N) break;
        d_w.middleRows(j * R, R) = h.topRows(N - off).transpose() * d_z.bottomRows(N - off);
        d_h.topRows(N - off).noalias() += d_z.bottomRows(N - off) * w.middleRows(j * R, R).transpose();
      }
      acc(n + ".conv.w", d_w);
      d_h_next = std::move(d_h);
    }
    acc("input.w", x_.transpose() * d_h_next);
    acc("input.b", d_h_next.colwise().sum());
  }

 private:
  const M& P(const std::string& name) const { return p_.at(name); }

  const VocoderConfig& c_;
  std::map<std::string, M> p_;
  M x_;
  M frames_;
  int hop_ = 1;
  std::vector<M> h_, t_, s_;
  M skip_, o1_;
};

template <typename T>
double NllImpl(const VocoderConfig& config, const ParamMap& params, const std::vector<VocoderExample>& batch,
               ParamMap* grads) {
  Index total = 0;
  for (const auto& ex : batch) total += static_cast<Index>(ex.audio.size());
  Require(total > 0, "vocoder nll: no samples");
  const int K = config.n_mixtures;
  ParallelNet<T> net(config, params);
  double nll = 0.0;
  for (const auto& ex : batch) {
    const auto in = ShiftRight(ex.audio);
    const Mat out = net.Forward(in, ex.cond, grads != nullptr).template cast<double>();
    Mat d_out(grads ? out.rows() : 0, out.cols());
    for (Index t = 0; t < out.rows(); ++t) {
      const int k = CodeToGridIndex(Quantize16(ex.audio[static_cast<size_t>(t)]));
      const auto p = MolParams::FromRow(out.row(t).data(), K);
      if (grads) {
        nll += MolNllWithGrad(k, p, d_out.row(t).data());
      } else {
        nll -= MolLogProbAtIndex(k, p);
      }
    }
    if (grads) net.Backward((d_out / static_cast<double>(total)).cast<T>(), *grads);
  }
  return nll / static_cast<double>(total);
}

void CheckInputs(const VocoderConfig& c, const std::vector<double>& audio, const ConditioningTrack& cond) {
  if (cond.size() != static_cast<Index>(audio.size())) {
    Fail(ErrorKind::kShape, "vocoder: audio length " + std::to_string(audio.size()) +
                                " != conditioning length " + std::to_string(cond.size()));
  }
  Require(cond.channels() == c.conditioning_channels, "vocoder: conditioning width does not match config");
}

}  // namespace

Mat Vocoder::ForwardParallel(const std::vector<double>& audio_in, const ConditioningTrack& cond) const {
  CheckInputs(config_, audio_in, cond);
  ParallelNet<double> net(config_, params_);
  return net.Forward(audio_in, cond, false);
}

double Vocoder::Nll(const std::vector<VocoderExample>& batch, ParamMap* grads) const {
  Require(!batch.empty(), "vocoder nll: empty batch");
  for (const auto& ex : batch) {
    CheckInputs(config_, ex.audio, ex.cond);
    for (double x : ex.audio) {
      if (Dequantize16(Quantize16(x)) != x) {
        Fail(ErrorKind::kInvalidArgument, "vocoder nll: target " + std::to_string(x) + " is not a 16-bit sample");
      }
    }
  }
  if (grads) grads->clear();
  const double nll = precision_ == Precision::kFloat32 ? NllImpl<float>(config_, params_, batch, grads)
                                                       : NllImpl<double>(config_, params_, batch, grads);
  if (!std::isfinite(nll)) Fail(ErrorKind::kNumeric, "vocoder NLL is not finite (" + std::to_string(nll) + ")");
  return nll;
}

double Vocoder::TrainStep(const std::vector<VocoderExample>& batch, Adam& optimizer) {
  ParamMap grads;
  const double nll = Nll(batch, &grads);
  optimizer.Step(params_, grads);
  return nll;
}

GenerateResult Vocoder::GenerateIncremental(const ConditioningTrack& cond, Rng& rng,
                                            const GenerateOptions& options) const {
  const auto& c = config_;
  Require(cond.channels() == c.conditioning_channels, "vocoder: conditioning width does not match config");
  const Index N = cond.size();
  const Index R = c.residual_channels;
  const Index G = c.gate_channels / 2;
  const int K = c.n_mixtures;
  const double res_scale = std::sqrt(0.5);
  const double skip_scale = std::sqrt(1.0 / c.layers);

  struct Layer {
    const Mat* conv_w;
    const Mat* conv_b;
    const Mat* skip_w;
    const Mat* skip_b;
    const Mat* res_w = nullptr;
    const Mat* res_b = nullptr;
    Mat cond_proj;  // T x Z
    Mat buffer;     // (kernel-1)*dilation past inputs, circular
    Index pos = 0;
    Index span = 0;
  };
  std::vector<Layer> layers(static_cast<size_t>(c.layers));
  for (int l = 0; l < c.layers; ++l) {
    const std::string n = "layer" + std::to_string(l);
    Layer& L = layers[l];
    L.conv_w = &params_.at(n + ".conv.w");
    L.conv_b = &params_.at(n + ".conv.b");
    L.skip_w = &params_.at(n + ".skip.w");
    L.skip_b = &params_.at(n + ".skip.b");
    if (l + 1 < c.layers) {
      L.res_w = &params_.at(n + ".res.w");
      L.res_b = &params_.at(n + ".res.b");
    }
    L.cond_proj = cond.frames * params_.at(n + ".cond.w");
    L.span = static_cast<Index>(c.kernel - 1) * c.dilations[l];
    L.buffer = Mat::Zero(L.span, R);
  }
  const RowVec in_w = params_.at("input.w").row(0);
  const RowVec in_b = params_.at("input.b").row(0);
  const Mat& out1_w = params_.at("out1.w");
  const RowVec out1_b = params_.at("out1.b").row(0);
  const Mat& out2_w = params_.at("out2.w");
  const RowVec out2_b = params_.at("out2.b").row(0);

  GenerateResult result;
  result.audio.resize(static_cast<size_t>(N));
  result.codes.resize(static_cast<size_t>(N));
  if (options.record_params) result.params.resize(N, c.output_channels());

  double prev = 0.0;
  RowVec h(R), z(c.gate_channels), g(G), skip(c.skip_channels), o1(c.skip_channels), out(c.output_channels());
  for (Index t = 0; t < N; ++t) {
    h = prev * in_w + in_b;
    skip.setZero();
    for (int l = 0; l < c.layers; ++l) {
      Layer& L = layers[l];
      const Index d = c.dilations[l];
      z.noalias() = h * L.conv_w->topRows(R);
      z += L.conv_b->row(0) + L.cond_proj.row(t / cond.hop);
      // Tap j reads the input from j*d steps back; slot (pos + span - j*d) % span.
      for (int j = 1; j < c.kernel; ++j) {
        const Index slot = (L.pos + L.span - j * d) % L.span;
        z.noalias() += L.buffer.row(slot) * L.conv_w->middleRows(j * R, R);
      }
      for (Index i = 0; i < G; ++i) g(i) = std::tanh(z(i)) * (1.0 / (1.0 + std::exp(-z(G + i))));
      skip.noalias() += g * *L.skip_w;
      skip += L.skip_b->row(0);
      L.buffer.row(L.pos) = h;
      L.pos = (L.pos + 1) % L.span;
      if (L.res_w) {
        RowVec next = g * *L.res_w;
        h = (next + L.res_b->row(0) + h) * res_scale;
      }
    }
    o1.noalias() = (skip * skip_scale).cwiseMax(0.0) * out1_w;
    o1 += out1_b;
    out.noalias() = o1.cwiseMax(0.0) * out2_w;
    out += out2_b;
    if (options.record_params) result.params.row(t) = out;
    const auto p = MolParams::FromRow(out.data(), K);
    const double x = options.deterministic ? ModeMeanMol(p) : SampleMol(p, rng);
    const int code = GridIndexToCode(NearestGridIndex(x));
    result.codes[static_cast<size_t>(t)] = static_cast<int16_t>(code);
    prev = Dequantize16(static_cast<int16_t>(code));
    result.audio[static_cast<size_t>(t)] = prev;
  }
  return result;
}

}  // namespace lrtts
