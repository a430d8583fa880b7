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
#include <cstring>
#include <fstream>

#include "audio.hpp"
#include "checkpoint.hpp"
#include "doctest.h"
#include "test_util.hpp"
#include "toy_corpus.hpp"
#include "transfer.hpp"

using namespace lrtts;

namespace {

Manifest Named(const std::string& prefix, int n) {
  Manifest m;
  for (int i = 0; i < n; ++i) {
    Utterance u;
    u.id = prefix + std::to_string(i);
    u.duration_s = 1.0;
    u.syllables = {"ba1"};
    m.push_back(u);
  }
  return m;
}

AMConfig Small() {
  AMConfig c;
  c.embed_dim = 16;
  c.encoder_dim = 16;
  c.decoder_dim = 32;
  c.attention_dim = 16;
  c.prenet_dims = {16};
  c.postnet_channels = 16;
  return c;
}

Checkpoint Sample() {
  Checkpoint c;
  c.kind = ModelKind::kVocoder;
  c.config = {{"answer", 42}};
  c.meta = {{"steps", 3}, {"note", "x"}};
  Rng rng(1);
  for (const char* n : {"a", "b.w", "c"}) {
    Mat m(3 + rng.Below(4), 1 + rng.Below(5));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal();
    RoundToFloat(m);
    c.tensors[n] = m;
  }
  return c;
}

// Shared toy corpora for the training tests.
struct Corpora {
  test::TempDir dir{"transfer"};
  std::string mand, shdia, shdia_val;
  Corpora() {
    ToyCorpusOptions o;
    o.n_utts = 6;
    o.seed = 1;
    o.id_prefix = "a";
    GenerateToyCorpus(o, dir / "mand");
    mand = dir / "mand/manifest.jsonl";
    o.mand_fraction = 0.0;
    o.seed = 2;
    o.n_utts = 4;
    o.id_prefix = "b";
    GenerateToyCorpus(o, dir / "shdia");
    shdia = dir / "shdia/manifest.jsonl";
  }
};

}  // namespace

TEST_CASE("merge corpora") {
  CHECK(MergeCorpora({Named("x", 100), Named("y", 50)}).size() == 150);
  const auto one = Named("x", 5);
  const auto merged = MergeCorpora({one});
  REQUIRE(merged.size() == 5);
  for (size_t i = 0; i < 5; ++i) CHECK(merged[i].id == one[i].id);
  try {
    MergeCorpora({Named("x", 3), Named("x", 2)});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("x0") != std::string::npos);
  }
}

TEST_CASE("train plan") {
  TrainPlan p;
  p.corpora = {"a.jsonl"};
  p.Validate();
  CHECK(TrainPlan::FromJson(p.ToJson()).ToJson() == p.ToJson());
  p.stage = Stage::kFinetune;
  CHECK_THROWS_AS(p.Validate(), Error);
  p.init_from = "avg.ckpt";
  p.Validate();
  CHECK(TrainPlan::DefaultLearningRate(Stage::kFinetune) == doctest::Approx(1e-4));
  CHECK(TrainPlan::DefaultLearningRate(Stage::kAverage) == doctest::Approx(1e-3));
  nlohmann::json j = {{"stage", "finetune"}, {"corpora", {"t.jsonl"}}, {"init_from", "m.ckpt"}};
  CHECK(TrainPlan::FromJson(j).learning_rate == doctest::Approx(1e-4));
  CHECK_THROWS_AS(TrainPlan::FromJson({{"stage", "later"}, {"corpora", {"t"}}}), Error);
  CHECK_THROWS_AS(TrainPlan::FromJson({{"corpora", nlohmann::json::array()}}), Error);
}

TEST_CASE("checkpoint container") {
  test::TempDir dir("ckpt");
  const Checkpoint c = Sample();
  const std::string path = dir / "c.ckpt";
  SaveCheckpoint(path, c);

  SUBCASE("round trip is bitwise") {
    const Checkpoint back = LoadCheckpoint(path, ModelKind::kVocoder);
    CHECK(back.kind == c.kind);
    CHECK(back.format_version == kCheckpointVersion);
    CHECK(back.config == c.config);
    CHECK(back.meta == c.meta);
    REQUIRE(back.tensors.size() == c.tensors.size());
    for (const auto& [n, m] : c.tensors) {
      const Mat& b = back.tensors.at(n);
      REQUIRE(b.rows() == m.rows());
      REQUIRE(b.cols() == m.cols());
      CHECK(std::memcmp(b.data(), m.data(), sizeof(double) * m.size()) == 0);
    }
    SaveCheckpoint(dir / "again.ckpt", back);
    CHECK(test::ReadBytes(dir / "again.ckpt") == test::ReadBytes(path));
  }
  SUBCASE("kind mismatch") {
    try {
      LoadCheckpoint(path, ModelKind::kAcoustic);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kKind);
    }
  }
  SUBCASE("truncation") {
    const std::string bytes = test::ReadBytes(path);
    for (size_t keep : {size_t{3}, size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
      std::ofstream(dir / "t.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(keep));
      try {
        LoadCheckpoint(dir / "t.ckpt");
        FAIL("expected an error");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kCorrupt);
      }
    }
  }
  SUBCASE("bad magic and flipped data") {
    std::string bytes = test::ReadBytes(path);
    std::string magic = bytes;
    magic[0] = 'X';
    std::ofstream(dir / "m.ckpt", std::ios::binary) << magic;
    std::string flipped = bytes;
    flipped[flipped.size() - 3] ^= 0x10;
    std::ofstream(dir / "f.ckpt", std::ios::binary) << flipped;
    for (const char* name : {"m.ckpt", "f.ckpt"}) {
      try {
        LoadCheckpoint(dir / name);
        FAIL("expected an error");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kCorrupt);
      }
    }
  }
  SUBCASE("unknown version") {
    std::string bytes = test::ReadBytes(path);
    const std::string key = "\"version\":1";
    const auto pos = bytes.find(key);
    REQUIRE(pos != std::string::npos);
    bytes[pos + key.size() - 1] = '7';
    std::ofstream(dir / "v.ckpt", std::ios::binary) << bytes;
    try {
      LoadCheckpoint(dir / "v.ckpt");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kVersion);
    }
  }
  SUBCASE("missing file and non-float values") {
    try {
      LoadCheckpoint(dir / "none.ckpt");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kIo);
    }
    Checkpoint bad = c;
    bad.tensors["a"](0, 0) = 0.1;
    CHECK_THROWS_AS(SaveCheckpoint(dir / "bad.ckpt", bad), Error);
  }
}

TEST_CASE("model bundles") {
  test::TempDir dir("bundle");
  Utterance u;
  u.id = "u";
  u.syllables = {"ba1", "zi2"};
  const Vocabulary vocab = Vocabulary::Build({u});
  AMConfig cfg = Small();
  cfg.vocab_size = vocab.size();
  AcousticBundle am{AcousticModel::Initialize(cfg, 3), vocab, {}, {}, {{"steps", 0}}};
  SaveAcoustic(dir / "am.ckpt", am);
  const auto back = LoadAcoustic(dir / "am.ckpt");
  CHECK(back.model.params() == am.model.params());
  CHECK(back.model.config() == cfg);
  CHECK(back.vocab == vocab);
  CHECK(back.audio == am.audio);
  CHECK_THROWS_AS(LoadVocoder(dir / "am.ckpt"), Error);

  // A tensor whose shape disagrees with the stored config.
  Checkpoint raw = LoadCheckpoint(dir / "am.ckpt");
  raw.tensors["embedding"] = Mat::Zero(2, 2);
  SaveCheckpoint(dir / "shape.ckpt", raw);
  try {
    LoadAcoustic(dir / "shape.ckpt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }

  VocoderConfig vc;
  vc.layers = 2;
  vc.dilations = {1, 2};
  VocoderBundle voc{Vocoder::Initialize(vc, 4), {}, {}};
  SaveVocoder(dir / "voc.ckpt", voc);
  const auto vb = LoadVocoder(dir / "voc.ckpt");
  CHECK(vb.model.params() == voc.model.params());
  CHECK(vb.model.config() == vc);
}

TEST_CASE("average and fine-tune workflow") {
  Corpora data;
  Manifest both = MergeCorpora({ReadManifest(data.mand), ReadManifest(data.shdia)});
  const Vocabulary vocab = Vocabulary::Build(both);
  const AMConfig cfg = Small();

  TrainPlan avg;
  avg.corpora = {data.mand, data.shdia};
  avg.steps = 0;
  avg.seed = 5;
  avg.batch_size = 3;

  SUBCASE("zero steps is the initialization") {
    const auto b = TrainAverageAcoustic(avg, cfg, vocab, {}, {});
    AMConfig full = cfg;
    full.vocab_size = vocab.size();
    const auto init = AcousticModel::Initialize(full, 5);
    for (const auto& [n, m] : init.params()) {
      if (n == "dec.proj.b") continue;  // starts at the corpus mean frame
      CHECK(b.model.params().at(n) == m);
    }
    // Shanghai utterances stay out of the average stage by default.
    for (const auto& id : b.meta.at("corpus_ids")) CHECK(id.get<std::string>().rfind("a_", 0) == 0);
  }
  SUBCASE("shdia can be included on request") {
    avg.include_shdia = true;
    const auto b = TrainAverageAcoustic(avg, cfg, vocab, {}, {});
    CHECK(b.meta.at("corpus_ids").size() == 10);
  }
  SUBCASE("training is deterministic and order invariant") {
    avg.steps = 3;
    avg.include_shdia = true;
    const auto a = TrainAverageAcoustic(avg, cfg, vocab, {}, {});
    const auto b = TrainAverageAcoustic(avg, cfg, vocab, {}, {});
    CHECK(a.model.params() == b.model.params());
    std::swap(avg.corpora[0], avg.corpora[1]);
    const auto c = TrainAverageAcoustic(avg, cfg, vocab, {}, {});
    CHECK(a.model.params() == c.model.params());
    test::TempDir dir("det");
    SaveAcoustic(dir / "a.ckpt", a);
    SaveAcoustic(dir / "b.ckpt", b);
    CHECK(test::ReadBytes(dir / "a.ckpt") == test::ReadBytes(dir / "b.ckpt"));
  }
  SUBCASE("fine-tuning") {
    test::TempDir dir("ft");
    avg.steps = 2;
    SaveAcoustic(dir / "avg.ckpt", TrainAverageAcoustic(avg, cfg, vocab, {}, {}));
    TrainPlan ft;
    ft.stage = Stage::kFinetune;
    ft.corpora = {data.shdia};
    ft.init_from = dir / "avg.ckpt";
    ft.learning_rate = 1e-4;
    ft.steps = 0;
    const auto base = LoadAcoustic(dir / "avg.ckpt");
    CHECK(FinetuneAcoustic(ft).model.params() == base.model.params());
    ft.steps = 2;
    ft.learning_rate = 0.0;
    CHECK(FinetuneAcoustic(ft).model.params() == base.model.params());
    ft.learning_rate = 1e-4;
    const auto tuned = FinetuneAcoustic(ft);
    size_t changed = 0;
    for (const auto& [n, m] : tuned.model.params()) changed += m != base.model.params().at(n) ? 1 : 0;
    CHECK(changed > base.model.params().size() / 2);
    CHECK(tuned.meta.at("stage") == "finetune");
  }
  SUBCASE("fine-tuning onto an unseen language is refused") {
    test::TempDir dir("oov");
    const Vocabulary mand_only = Vocabulary::Build(ReadManifest(data.mand));
    SaveAcoustic(dir / "avg.ckpt", TrainAverageAcoustic(avg, cfg, mand_only, {}, {}));
    TrainPlan ft;
    ft.stage = Stage::kFinetune;
    ft.corpora = {data.shdia};
    ft.init_from = dir / "avg.ckpt";
    ft.steps = 1;
    try {
      FinetuneAcoustic(ft);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kOutOfVocabulary);
      CHECK(std::string(e.what()).find("Rebuild the vocabulary") != std::string::npos);
    }
  }
}

TEST_CASE("vocoder workflow") {
  Corpora data;
  const Vocabulary vocab = Vocabulary::Build(ReadManifest(data.mand));
  TrainPlan avg;
  avg.corpora = {data.mand};
  avg.steps = 0;
  const auto am = TrainAverageAcoustic(avg, Small(), vocab, {}, {});

  const auto examples = MakeVocoderExamples(ReadManifest(data.mand), am);
  REQUIRE(examples.size() == 6);
  for (const auto& ex : examples) {
    CHECK(static_cast<Index>(ex.audio.size()) == ex.cond.size());
    CHECK(ex.cond.channels() == 80);
    for (double v : ex.audio) CHECK(v == Dequantize16(Quantize16(v)));
  }

  VocoderConfig vc;
  vc.layers = 4;
  vc.dilations = {1, 2, 4, 8};
  vc.residual_channels = 8;
  vc.gate_channels = 16;
  vc.skip_channels = 8;
  TrainPlan vp;
  vp.corpora = {data.mand};
  vp.steps = 2;
  vp.batch_size = 2;
  vp.segment_samples = 1000;
  vp.seed = 9;
  const auto a = TrainAverageVocoder(vp, vc, am);
  const auto b = TrainAverageVocoder(vp, vc, am);
  CHECK(a.model.params() == b.model.params());
  CHECK(a.meta.at("loss_history").size() == 2);

  test::TempDir dir("vft");
  SaveAcoustic(dir / "am.ckpt", am);
  SaveVocoder(dir / "voc.ckpt", a);
  TrainPlan ft;
  ft.stage = Stage::kFinetune;
  ft.corpora = {data.mand};
  ft.init_from = dir / "voc.ckpt";
  ft.steps = 0;
  CHECK(FinetuneVocoder(ft, am).model.params() == a.model.params());
}
