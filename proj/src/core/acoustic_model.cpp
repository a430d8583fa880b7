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
#include "acoustic_model.hpp"

#include <algorithm>
#include <sstream>

#include "autograd.hpp"

namespace lrtts {

using ad::Bound;
using ad::Tape;
using ad::Var;

void AMConfig::Validate() const {
  Require(vocab_size > 0, "acoustic config: vocab_size must be positive");
  Require(embed_dim > 0 && encoder_dim > 0 && decoder_dim > 0 && attention_dim > 0,
          "acoustic config: dimensions must be positive");
  Require(encoder_dim % 2 == 0, "acoustic config: encoder_dim must be even (bidirectional halves)");
  Require(location_filters > 0 && location_kernel > 0 && location_kernel % 2 == 1,
          "acoustic config: location kernel must be a positive odd width");
  Require(!prenet_dims.empty(), "acoustic config: prenet needs at least one layer");
  for (int d : prenet_dims) Require(d > 0, "acoustic config: prenet dims must be positive");
  Require(encoder_conv_layers >= 0 && encoder_kernel > 0 && encoder_kernel % 2 == 1,
          "acoustic config: encoder kernel must be a positive odd width");
  Require(postnet_layers >= 1 && postnet_channels > 0 && postnet_kernel > 0 && postnet_kernel % 2 == 1,
          "acoustic config: postnet kernel must be a positive odd width");
  Require(n_mels > 0, "acoustic config: n_mels must be positive");
  Require(max_decoder_steps >= 0 && max_decoder_ratio > 0.0, "acoustic config: invalid decoder step cap");
  Require(stop_threshold > 0.0 && stop_threshold < 1.0, "acoustic config: stop_threshold must lie in (0, 1)");
  Require(teacher_forcing_ratio >= 0.0 && teacher_forcing_ratio <= 1.0,
          "acoustic config: teacher_forcing_ratio must lie in [0, 1]");
  Require(prenet_dropout >= 0.0 && prenet_dropout < 1.0, "acoustic config: prenet_dropout must lie in [0, 1)");
  Require(guided_attention_weight >= 0.0 && guided_attention_width > 0.0,
          "acoustic config: guided attention needs weight >= 0 and width > 0");
}

int AMConfig::MaxDecoderSteps(size_t num_tokens) const {
  if (max_decoder_steps > 0) return max_decoder_steps;
  return std::max(1, static_cast<int>(std::ceil(max_decoder_ratio * static_cast<double>(num_tokens))));
}

nlohmann::json AMConfig::ToJson() const {
  return {{"vocab_size", vocab_size},
          {"embed_dim", embed_dim},
          {"encoder_dim", encoder_dim},
          {"decoder_dim", decoder_dim},
          {"attention_dim", attention_dim},
          {"attention_location_filters", location_filters},
          {"attention_location_kernel", location_kernel},
          {"prenet_dims", prenet_dims},
          {"encoder_conv_layers", encoder_conv_layers},
          {"encoder_kernel", encoder_kernel},
          {"postnet_layers", postnet_layers},
          {"postnet_channels", postnet_channels},
          {"postnet_kernel", postnet_kernel},
          {"n_mels", n_mels},
          {"max_decoder_steps", max_decoder_steps},
          {"max_decoder_ratio", max_decoder_ratio},
          {"stop_threshold", stop_threshold},
          {"teacher_forcing_ratio", teacher_forcing_ratio},
          {"prenet_dropout", prenet_dropout},
          {"guided_attention_weight", guided_attention_weight},
          {"guided_attention_width", guided_attention_width}};
}

AMConfig AMConfig::FromJson(const nlohmann::json& j) {
  AMConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.encoder_dim = j.value("encoder_dim", c.encoder_dim);
  c.decoder_dim = j.value("decoder_dim", c.decoder_dim);
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.location_filters = j.value("attention_location_filters", c.location_filters);
  c.location_kernel = j.value("attention_location_kernel", c.location_kernel);
  c.prenet_dims = j.value("prenet_dims", c.prenet_dims);
  c.encoder_conv_layers = j.value("encoder_conv_layers", c.encoder_conv_layers);
  c.encoder_kernel = j.value("encoder_kernel", c.encoder_kernel);
  c.postnet_layers = j.value("postnet_layers", c.postnet_layers);
  c.postnet_channels = j.value("postnet_channels", c.postnet_channels);
  c.postnet_kernel = j.value("postnet_kernel", c.postnet_kernel);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.max_decoder_steps = j.value("max_decoder_steps", c.max_decoder_steps);
  c.max_decoder_ratio = j.value("max_decoder_ratio", c.max_decoder_ratio);
  c.stop_threshold = j.value("stop_threshold", c.stop_threshold);
  c.teacher_forcing_ratio = j.value("teacher_forcing_ratio", c.teacher_forcing_ratio);
  c.prenet_dropout = j.value("prenet_dropout", c.prenet_dropout);
  c.guided_attention_weight = j.value("guided_attention_weight", c.guided_attention_weight);
  c.guided_attention_width = j.value("guided_attention_width", c.guided_attention_width);
  return c;
}

ShapeMap AcousticParamShapes(const AMConfig& c) {
  c.Validate();
  ShapeMap s;
  const Index E = c.encoder_dim;
  const Index H = c.encoder_dim / 2;
  const Index D = c.decoder_dim;
  const Index A = c.attention_dim;
  s["embedding"] = {c.vocab_size, c.embed_dim};
  for (int i = 0; i < c.encoder_conv_layers; ++i) {
    const std::string n = "enc.conv" + std::to_string(i);
    s[n + ".w"] = {static_cast<Index>(c.encoder_kernel) * c.embed_dim, c.embed_dim};
    s[n + ".b"] = {1, c.embed_dim};
  }
  for (const char* dir : {"enc.lstm_fw", "enc.lstm_bw"}) {
    s[std::string(dir) + ".w"] = {c.embed_dim + H, 4 * H};
    s[std::string(dir) + ".b"] = {1, 4 * H};
  }
  s["att.query.w"] = {D, A};
  s["att.memory.w"] = {E, A};
  s["att.loc_conv.w"] = {c.location_kernel, c.location_filters};
  s["att.loc_dense.w"] = {c.location_filters, A};
  s["att.v"] = {A, 1};
  s["att.b"] = {1, A};
  Index in = c.n_mels;
  for (size_t i = 0; i < c.prenet_dims.size(); ++i) {
    const std::string n = "prenet." + std::to_string(i);
    s[n + ".w"] = {in, c.prenet_dims[i]};
    s[n + ".b"] = {1, c.prenet_dims[i]};
    in = c.prenet_dims[i];
  }
  s["dec.att_rnn.w"] = {in + E + D, 4 * D};
  s["dec.att_rnn.b"] = {1, 4 * D};
  s["dec.dec_rnn.w"] = {D + E + D, 4 * D};
  s["dec.dec_rnn.b"] = {1, 4 * D};
  s["dec.proj.w"] = {D + E, c.n_mels};
  s["dec.proj.b"] = {1, c.n_mels};
  s["dec.stop.w"] = {D + E, 1};
  s["dec.stop.b"] = {1, 1};
  for (int i = 0; i < c.postnet_layers; ++i) {
    const std::string n = "postnet." + std::to_string(i);
    const Index cin = i == 0 ? c.n_mels : c.postnet_channels;
    const Index cout = i + 1 == c.postnet_layers ? c.n_mels : c.postnet_channels;
    s[n + ".w"] = {static_cast<Index>(c.postnet_kernel) * cin, cout};
    s[n + ".b"] = {1, cout};
  }
  return s;
}

Mat StopTargets(Index frames) {
  Mat t = Mat::Zero(frames, 1);
  if (frames > 0) t(frames - 1, 0) = 1.0;
  return t;
}

namespace {

Var Linear(const Bound& p, const Var& x, const std::string& name) {
  return ad::AddRow(ad::MatMul(x, p[name + ".w"]), p[name + ".b"]);
}

std::pair<Var, Var> LstmCell(const Bound& p, const std::string& name, const Var& x, const Var& h, const Var& c) {
  const Index H = h.cols();
  Var z = Linear(p, ad::ConcatCols({x, h}), name);
  Var i = ad::Sigmoid(ad::SliceCols(z, 0, H));
  Var f = ad::Sigmoid(ad::SliceCols(z, H, H));
  Var g = ad::Tanh(ad::SliceCols(z, 2 * H, H));
  Var o = ad::Sigmoid(ad::SliceCols(z, 3 * H, H));
  Var c_new = ad::Add(ad::Mul(f, c), ad::Mul(i, g));
  Var h_new = ad::Mul(o, ad::Tanh(c_new));
  return {h_new, c_new};
}

struct EncodedGraph {
  Var memory;  // (B*L) x E
  Var keys;    // (B*L) x A
  Mat mask;    // B x L
  Index batch = 0;
  Index length = 0;
};

struct GraphState {
  Var att_h, att_c, dec_h, dec_c, context, align;
};

EncodedGraph EncodeGraph(const Bound& p, const AMConfig& cfg, const std::vector<const std::vector<int>*>& seqs) {
  Tape& tape = p.tape();
  const Index B = static_cast<Index>(seqs.size());
  Index L = 0;
  for (const auto* s : seqs) L = std::max<Index>(L, static_cast<Index>(s->size()));
  Require(L > 0, "encode: empty token sequence");
  std::vector<int> flat(static_cast<size_t>(B * L), Vocabulary::kPad);
  Mat mask = Mat::Zero(B, L);
  for (Index b = 0; b < B; ++b) {
    for (size_t t = 0; t < seqs[b]->size(); ++t) {
      const int id = (*seqs[b])[t];
      if (id < 0 || id >= cfg.vocab_size) {
        Fail(ErrorKind::kOutOfVocabulary,
             "token id " + std::to_string(id) + " >= vocab_size " + std::to_string(cfg.vocab_size));
      }
      flat[static_cast<size_t>(b * L) + t] = id;
      mask(b, static_cast<Index>(t)) = 1.0;
    }
  }
  const Mat mask_col = Eigen::Map<const Mat>(mask.data(), B * L, 1);

  Var x = ad::MulColConst(ad::GatherRows(p["embedding"], flat), mask_col);
  for (int i = 0; i < cfg.encoder_conv_layers; ++i) {
    const std::string n = "enc.conv" + std::to_string(i);
    x = ad::Conv1d(x, p[n + ".w"], p[n + ".b"], B, L, cfg.encoder_kernel, 1, (cfg.encoder_kernel - 1) / 2);
    x = ad::MulColConst(ad::Relu(x), mask_col);
  }

  const Index H = cfg.encoder_dim / 2;
  std::vector<Var> fw(static_cast<size_t>(L));
  std::vector<Var> bw(static_cast<size_t>(L));
  {
    Var h = tape.Constant(Mat::Zero(B, H));
    Var c = tape.Constant(Mat::Zero(B, H));
    for (Index t = 0; t < L; ++t) {
      std::tie(h, c) = LstmCell(p, "enc.lstm_fw", ad::TimeSlice(x, B, L, t), h, c);
      fw[static_cast<size_t>(t)] = h;
    }
  }
  {
    // Padded steps leave the state untouched, so each sequence's backward
    // pass starts from zeros at its own last token.
    Var h = tape.Constant(Mat::Zero(B, H));
    Var c = tape.Constant(Mat::Zero(B, H));
    for (Index t = L - 1; t >= 0; --t) {
      auto [hn, cn] = LstmCell(p, "enc.lstm_bw", ad::TimeSlice(x, B, L, t), h, c);
      const Mat m = mask.col(t);
      const Mat keep = (1.0 - m.array()).matrix();
      h = ad::Add(ad::MulColConst(hn, m), ad::MulColConst(h, keep));
      c = ad::Add(ad::MulColConst(cn, m), ad::MulColConst(c, keep));
      bw[static_cast<size_t>(t)] = h;
    }
  }
  std::vector<Var> steps;
  steps.reserve(static_cast<size_t>(L));
  for (Index t = 0; t < L; ++t) steps.push_back(ad::ConcatCols({fw[t], bw[t]}));
  EncodedGraph enc;
  enc.memory = ad::MulColConst(ad::StackTime(steps), mask_col);
  enc.keys = ad::MatMul(enc.memory, p["att.memory.w"]);
  enc.mask = std::move(mask);
  enc.batch = B;
  enc.length = L;
  return enc;
}

std::pair<Var, Var> AttentionGraph(const Bound& p, const Var& query, const EncodedGraph& enc, const Var& prev_align) {
  Var q = ad::RepeatRows(ad::MatMul(query, p["att.query.w"]), enc.length);
  Var loc = ad::MatMul(ad::RowConv(prev_align, p["att.loc_conv.w"]), p["att.loc_dense.w"]);
  Var s = ad::Tanh(ad::AddRow(ad::Add(ad::Add(q, enc.keys), loc), p["att.b"]));
  Var e = ad::Reshape(ad::MatMul(s, p["att.v"]), enc.batch, enc.length);
  Var align = ad::MaskedSoftmaxRows(e, enc.mask);
  Var context = ad::BatchedContext(align, enc.memory);
  return {context, align};
}

GraphState InitialGraphState(Tape& tape, const AMConfig& cfg, const EncodedGraph& enc) {
  const Index B = enc.batch;
  GraphState s;
  s.att_h = tape.Constant(Mat::Zero(B, cfg.decoder_dim));
  s.att_c = tape.Constant(Mat::Zero(B, cfg.decoder_dim));
  s.dec_h = tape.Constant(Mat::Zero(B, cfg.decoder_dim));
  s.dec_c = tape.Constant(Mat::Zero(B, cfg.decoder_dim));
  s.context = tape.Constant(Mat::Zero(B, cfg.encoder_dim));
  Mat align = Mat::Zero(B, enc.length);
  align.col(0).setOnes();
  s.align = tape.Constant(std::move(align));
  return s;
}

// One decoder step: returns (frame, stop_logit) and advances `s`. With a
// `dropout` generator the prenet drops units (inverted scaling).
std::pair<Var, Var> StepGraph(const Bound& p, const AMConfig& cfg, const Var& prev_frame, GraphState& s,
                              const EncodedGraph& enc, Rng* dropout = nullptr) {
  Var x = prev_frame;
  for (size_t i = 0; i < cfg.prenet_dims.size(); ++i) {
    x = ad::Relu(Linear(p, x, "prenet." + std::to_string(i)));
    if (dropout && cfg.prenet_dropout > 0.0) {
      const double keep = 1.0 - cfg.prenet_dropout;
      Mat m(x.value().rows(), x.value().cols());
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = dropout->Uniform() < keep ? 1.0 / keep : 0.0;
      x = ad::MulConst(x, m);
    }
  }
  std::tie(s.att_h, s.att_c) = LstmCell(p, "dec.att_rnn", ad::ConcatCols({x, s.context}), s.att_h, s.att_c);
  std::tie(s.context, s.align) = AttentionGraph(p, s.att_h, enc, s.align);
  std::tie(s.dec_h, s.dec_c) = LstmCell(p, "dec.dec_rnn", ad::ConcatCols({s.att_h, s.context}), s.dec_h, s.dec_c);
  Var proj_in = ad::ConcatCols({s.dec_h, s.context});
  return {Linear(p, proj_in, "dec.proj"), Linear(p, proj_in, "dec.stop")};
}

Var PostnetGraph(const Bound& p, const AMConfig& cfg, const Var& mel_pre, Index batch, Index frames,
                 const Mat& frame_mask) {
  Var x = ad::MulColConst(mel_pre, frame_mask);
  const int pad = (cfg.postnet_kernel - 1) / 2;
  for (int i = 0; i < cfg.postnet_layers; ++i) {
    const std::string n = "postnet." + std::to_string(i);
    x = ad::Conv1d(x, p[n + ".w"], p[n + ".b"], batch, frames, cfg.postnet_kernel, 1, pad);
    if (i + 1 < cfg.postnet_layers) x = ad::Tanh(x);
    x = ad::MulColConst(x, frame_mask);
  }
  return ad::Add(mel_pre, x);
}

struct StateValues {
  static DecoderState From(const GraphState& s) {
    return {s.att_h.value(), s.att_c.value(), s.dec_h.value(), s.dec_c.value(), s.context.value(), s.align.value()};
  }
  static GraphState To(Tape& tape, const DecoderState& d) {
    return {tape.Constant(d.att_h), tape.Constant(d.att_c), tape.Constant(d.dec_h),
            tape.Constant(d.dec_c), tape.Constant(d.context), tape.Constant(d.alignment)};
  }
};

EncodedGraph EncodedFromValues(Tape& tape, const EncodedInput& enc) {
  EncodedGraph g;
  g.memory = tape.Constant(enc.memory);
  g.keys = tape.Constant(enc.keys);
  g.mask = Mat::Ones(1, enc.memory.rows());
  g.batch = 1;
  g.length = enc.memory.rows();
  return g;
}

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

AcousticModel::AcousticModel(AMConfig config, ParamMap params) : config_(std::move(config)), params_(std::move(params)) {
  const auto shapes = AcousticParamShapes(config_);
  for (const auto& [name, shape] : shapes) {
    auto it = params_.find(name);
    if (it == params_.end()) Fail(ErrorKind::kShape, "acoustic model: missing parameter " + name);
    if (it->second.rows() != shape.first || it->second.cols() != shape.second) {
      std::ostringstream msg;
      msg << "acoustic model: parameter " << name << " is " << it->second.rows() << "x" << it->second.cols()
          << ", config implies " << shape.first << "x" << shape.second;
      Fail(ErrorKind::kShape, msg.str());
    }
  }
  if (params_.size() != shapes.size()) Fail(ErrorKind::kShape, "acoustic model: unexpected extra parameters");
}

AcousticModel AcousticModel::Initialize(const AMConfig& config, uint64_t seed) {
  Rng rng(seed);
  ParamMap params;
  for (const auto& [name, shape] : AcousticParamShapes(config)) {
    const auto [rows, cols] = shape;
    Mat m = Mat::Zero(rows, cols);
    const bool is_bias = name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    if (name == "embedding") {
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(-0.3, 0.3);
    } else if (!is_bias) {
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(-bound, bound);
    } else if (name.find("lstm") != std::string::npos || name.find("_rnn") != std::string::npos) {
      const Index H = cols / 4;
      m.middleCols(H, H).setOnes();  // forget gate
    }
    RoundToFloat(m);
    params.emplace(name, std::move(m));
  }
  return AcousticModel(config, std::move(params));
}

Mat AcousticModel::Encode(const std::vector<int>& ids) const { return Prepare(ids).memory; }

EncodedInput AcousticModel::Prepare(const std::vector<int>& ids) const {
  Tape tape;
  Bound p(tape, params_, false);
  const auto enc = EncodeGraph(p, config_, {&ids});
  return {enc.memory.value(), enc.keys.value()};
}

std::pair<Mat, Mat> AcousticModel::AttentionStep(const Mat& query, const Mat& memory, const Mat& prev_alignment) const {
  Require(query.rows() == 1 && query.cols() == config_.decoder_dim, "attention: query must be 1 x decoder_dim");
  Require(memory.cols() == config_.encoder_dim, "attention: memory must be L x encoder_dim");
  Require(prev_alignment.rows() == 1 && prev_alignment.cols() == memory.rows(), "attention: alignment must be 1 x L");
  Tape tape;
  Bound p(tape, params_, false);
  EncodedGraph enc = EncodedFromValues(tape, {memory, memory * params_.at("att.memory.w")});
  auto [ctx, align] = AttentionGraph(p, tape.Constant(query), enc, tape.Constant(prev_alignment));
  return {ctx.value(), align.value()};
}

DecoderState AcousticModel::InitialState(const EncodedInput& enc) const {
  Tape tape;
  EncodedGraph g = EncodedFromValues(tape, enc);
  return StateValues::From(InitialGraphState(tape, config_, g));
}

DecodeStepOutput AcousticModel::DecodeStep(const Mat& prev_frame, const DecoderState& state,
                                           const EncodedInput& enc) const {
  Require(prev_frame.rows() == 1 && prev_frame.cols() == config_.n_mels, "decode_step: frame must be 1 x n_mels");
  Tape tape;
  Bound p(tape, params_, false);
  EncodedGraph g = EncodedFromValues(tape, enc);
  GraphState s = StateValues::To(tape, state);
  auto [frame, stop] = StepGraph(p, config_, tape.Constant(prev_frame), s, g);
  DecodeStepOutput out;
  out.frame = frame.value();
  out.stop_logit = stop.value()(0, 0);
  out.state = StateValues::From(s);
  out.alignment = s.align.value();
  return out;
}

SynthesisResult AcousticModel::Synthesize(const std::vector<int>& ids) const {
  const int cap = config_.MaxDecoderSteps(ids.size());
  Tape tape;
  Bound p(tape, params_, false);
  const EncodedGraph enc = EncodeGraph(p, config_, {&ids});
  GraphState s = InitialGraphState(tape, config_, enc);
  Var prev = tape.Constant(Mat::Zero(1, config_.n_mels));
  std::vector<Var> frames;
  SynthesisResult out;
  std::vector<Mat> aligns;
  while (static_cast<int>(frames.size()) < cap) {
    auto [frame, stop] = StepGraph(p, config_, prev, s, enc);
    frames.push_back(frame);
    aligns.push_back(s.align.value());
    out.stop_logits.push_back(stop.value()(0, 0));
    prev = frame;
    if (Sigmoid(stop.value()(0, 0)) > config_.stop_threshold) {
      out.stopped_naturally = true;
      break;
    }
  }
  const Index T = static_cast<Index>(frames.size());
  Var pre = ad::StackTime(frames);
  Var post = PostnetGraph(p, config_, pre, 1, T, Mat::Ones(T, 1));
  out.mel_pre = pre.value();
  out.mel.frames = post.value();
  out.alignments.resize(T, enc.length);
  for (Index t = 0; t < T; ++t) out.alignments.row(t) = aligns[static_cast<size_t>(t)];
  return out;
}

SynthesisResult AcousticModel::TeacherForced(const std::vector<int>& ids, const Mat& gt_mel) const {
  Require(gt_mel.rows() > 0, "teacher_forced_predict: ground-truth mel has no frames");
  Require(gt_mel.cols() == config_.n_mels, "teacher_forced_predict: mel width does not match n_mels");
  Tape tape;
  Bound p(tape, params_, false);
  const EncodedGraph enc = EncodeGraph(p, config_, {&ids});
  GraphState s = InitialGraphState(tape, config_, enc);
  const Index T = gt_mel.rows();
  std::vector<Var> frames;
  SynthesisResult out;
  out.alignments.resize(T, enc.length);
  for (Index t = 0; t < T; ++t) {
    Var prev = tape.Constant(t == 0 ? Mat::Zero(1, config_.n_mels) : Mat(gt_mel.row(t - 1)));
    auto [frame, stop] = StepGraph(p, config_, prev, s, enc);
    frames.push_back(frame);
    out.alignments.row(t) = s.align.value();
    out.stop_logits.push_back(stop.value()(0, 0));
  }
  Var pre = ad::StackTime(frames);
  Var post = PostnetGraph(p, config_, pre, 1, T, Mat::Ones(T, 1));
  out.mel_pre = pre.value();
  out.mel.frames = post.value();
  out.stopped_naturally = Sigmoid(out.stop_logits.back()) > config_.stop_threshold;
  return out;
}

MelSpectrogram AcousticModel::TeacherForcedPredict(const std::vector<int>& ids, const MelSpectrogram& gt_mel) const {
  MelSpectrogram out = TeacherForced(ids, gt_mel.frames).mel;
  out.hop_s = gt_mel.hop_s;
  return out;
}

AMLoss AcousticModel::Loss(const std::vector<AMExample>& batch, ParamMap* grads, Rng* rng) const {
  Require(!batch.empty(), "acoustic loss: empty batch");
  const Index B = static_cast<Index>(batch.size());
  Index T = 0;
  std::vector<const std::vector<int>*> seqs;
  for (const auto& ex : batch) {
    Require(ex.mel.rows() > 0, "acoustic loss: example with no frames");
    Require(ex.mel.cols() == config_.n_mels, "acoustic loss: target mel width does not match n_mels");
    T = std::max(T, ex.mel.rows());
    seqs.push_back(&ex.ids);
  }
  Mat target = Mat::Zero(B * T, config_.n_mels);
  Mat stop_target = Mat::Zero(B * T, 1);
  Mat mask = Mat::Zero(B * T, 1);
  for (Index b = 0; b < B; ++b) {
    const Index Tb = batch[b].mel.rows();
    target.middleRows(b * T, Tb) = batch[b].mel;
    mask.middleRows(b * T, Tb).setOnes();
    stop_target(b * T + Tb - 1, 0) = 1.0;
  }

  Tape tape;
  Bound p(tape, params_, grads != nullptr);
  const EncodedGraph enc = EncodeGraph(p, config_, seqs);
  GraphState s = InitialGraphState(tape, config_, enc);
  std::vector<Var> frames;
  std::vector<Var> stops;
  std::vector<Var> guides;
  frames.reserve(static_cast<size_t>(T));
  Mat prev_value = Mat::Zero(B, config_.n_mels);
  const double g2 = 2.0 * config_.guided_attention_width * config_.guided_attention_width;
  for (Index t = 0; t < T; ++t) {
    Var prev = tape.Constant(prev_value);
    auto [frame, stop] = StepGraph(p, config_, prev, s, enc, rng);
    frames.push_back(frame);
    stops.push_back(stop);
    if (config_.guided_attention_weight > 0.0) {
      // Penalise weight far from the diagonal n/N = t/T of each utterance.
      Mat w = Mat::Zero(B, enc.length);
      for (Index b = 0; b < B; ++b) {
        const Index Tb = batch[b].mel.rows();
        const Index Nb = static_cast<Index>(seqs[b]->size());
        if (t >= Tb) continue;
        for (Index n = 0; n < Nb; ++n) {
          const double d = static_cast<double>(n) / Nb - static_cast<double>(t) / Tb;
          w(b, n) = 1.0 - std::exp(-d * d / g2);
        }
      }
      guides.push_back(ad::Sum(ad::MulConst(s.align, w)));
    }
    const bool use_truth = config_.teacher_forcing_ratio >= 1.0 || rng == nullptr ||
                           rng->Uniform() < config_.teacher_forcing_ratio;
    for (Index b = 0; b < B; ++b) {
      if (use_truth) {
        prev_value.row(b) = t < batch[b].mel.rows() ? Mat(batch[b].mel.row(t)) : Mat::Zero(1, config_.n_mels);
      } else {
        prev_value.row(b) = frame.value().row(b);
      }
    }
  }
  Var pre = ad::StackTime(frames);
  Var post = PostnetGraph(p, config_, pre, B, T, mask);
  Var stop_logits = ad::StackTime(stops);
  Var l_pre = ad::MaskedMse(pre, target, mask);
  Var l_post = ad::MaskedMse(post, target, mask);
  Var l_stop = ad::MaskedBceWithLogits(stop_logits, stop_target, mask);
  Var total = ad::Add(ad::Add(l_pre, l_post), l_stop);
  AMLoss loss{l_pre.value()(0, 0), l_post.value()(0, 0), l_stop.value()(0, 0)};
  if (!guides.empty()) {
    Var g = guides[0];
    for (size_t i = 1; i < guides.size(); ++i) g = ad::Add(g, guides[i]);
    g = ad::Scale(g, config_.guided_attention_weight / mask.sum());
    loss.attention = g.value()(0, 0);
    total = ad::Add(total, g);
  }
  if (!std::isfinite(loss.total())) {
    std::ostringstream msg;
    msg << "acoustic loss is not finite (mel_pre=" << loss.mel_pre << ", mel_post=" << loss.mel_post
        << ", stop=" << loss.stop << ")";
    Fail(ErrorKind::kNumeric, msg.str());
  }
  if (grads) {
    tape.Backward(total);
    *grads = p.Gradients();
  }
  return loss;
}

AMLoss AcousticModel::TrainStep(const std::vector<AMExample>& batch, Adam& optimizer, Rng* rng) {
  ParamMap grads;
  const AMLoss loss = Loss(batch, &grads, rng);
  optimizer.Step(params_, grads);
  return loss;
}

}  // namespace lrtts
