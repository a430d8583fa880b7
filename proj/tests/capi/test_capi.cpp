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
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lowres_tts/lowres_tts.h"

namespace fs = std::filesystem;

namespace {

std::string Slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int RunCli(const std::string& args) {
  const std::string cmd = std::string(LRTTS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Small models so the whole workflow runs in seconds.
const char* kConfig = R"({
  "seed": 4,
  "am": {"embed_dim": 16, "encoder_dim": 16, "decoder_dim": 32, "attention_dim": 16,
         "prenet_dims": [16], "postnet_channels": 16},
  "vocoder": {"layers": 2, "dilations": [1, 2], "residual_channels": 4, "gate_channels": 8,
              "skip_channels": 4, "mixtures": 2},
  "plans": {"train_voc": {"segment_samples": 400}}
})";

struct Workspace {
  fs::path root;
  lrtts_pipeline* p = nullptr;

  explicit Workspace(const std::string& tag) {
    root = fs::temp_directory_path() / ("lrtts_capi_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "config.json") << kConfig;
    REQUIRE(lrtts_pipeline_create((root / "config.json").c_str(), &p) == LRTTS_OK);
    REQUIRE(lrtts_pipeline_set_work_dir(p, root.c_str()) == LRTTS_OK);
  }
  ~Workspace() {
    lrtts_pipeline_destroy(p);
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string operator/(const std::string& s) const { return (root / s).string(); }

  // Toy corpus, vocabulary and a two-step acoustic model.
  void Build() {
    lrtts_toy_options t;
    lrtts_toy_options_init(&t);
    t.n_utts = 40;
    REQUIRE(lrtts_gen_toycorpus(p, &t, "toy") == LRTTS_OK);
    const std::string manifest = *this / "toy/manifest.jsonl";
    const char* ms[] = {manifest.c_str()};
    int size = 0;
    REQUIRE(lrtts_vocab(p, ms, 1, "vocab.json", &size) == LRTTS_OK);
    CHECK(size > 4);
    lrtts_train_options o;
    lrtts_train_options_init(&o);
    o.corpora = ms;
    o.n_corpora = 1;
    o.steps = 2;
    REQUIRE(lrtts_train_am(p, &o, (*this / "vocab.json").c_str(), "am.ckpt") == LRTTS_OK);
  }
};

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::string(lrtts_status_name(LRTTS_OK)) == "ok");
  CHECK(std::string(lrtts_version()) == "0.1.0");
  lrtts_acoustic* am = nullptr;
  CHECK(lrtts_acoustic_load("/nonexistent/am.ckpt", &am) == LRTTS_IO_ERROR);
  CHECK(am == nullptr);
  CHECK(std::string(lrtts_last_error()).find("/nonexistent/am.ckpt") != std::string::npos);
  CHECK(lrtts_pipeline_create(nullptr, nullptr) == LRTTS_INVALID_ARGUMENT);
}

TEST_CASE("prep histogram respects the cap") {
  Workspace w("prep");
  lrtts_toy_options t;
  lrtts_toy_options_init(&t);
  t.n_utts = 6;
  t.long_form = 1;
  REQUIRE(lrtts_gen_toycorpus(w.p, &t, "long") == LRTTS_OK);
  lrtts_prep_summary s;
  REQUIRE(lrtts_prep(w.p, (w / "long/manifest.jsonl").c_str(), "prep", &s) == LRTTS_OK);
  CHECK(s.input_utterances == 6);
  CHECK(s.max_duration_s <= 7.0);
  std::istringstream csv(Slurp(w / "prep/hist_after.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "bin_start_s,count");
  while (std::getline(csv, line)) {
    const double start = std::stod(line.substr(0, line.find(',')));
    CHECK(start < 7.0);
  }
}

TEST_CASE("end to end through the handle API") {
  Workspace w("e2e");
  w.Build();

  lrtts_waveform_options wo;
  lrtts_waveform_options_init(&wo);
  wo.griffin_lim_iters = 4;
  int stopped = -1;
  REQUIRE(lrtts_tts(w.p, (w / "am.ckpt").c_str(), "ba1 da4", "mand", &wo, "out.wav", &stopped) == LRTTS_OK);
  CHECK(fs::file_size(w / "out.wav") > 44);
  CHECK((stopped == 0 || stopped == 1));

  lrtts_acoustic* am = nullptr;
  REQUIRE(lrtts_acoustic_load((w / "am.ckpt").c_str(), &am) == LRTTS_OK);
  lrtts_mel* mel = nullptr;
  CHECK(lrtts_acoustic_synthesize(am, "ba1 da4", "xx", &mel, &stopped) == LRTTS_INVALID_ARGUMENT);
  REQUIRE(lrtts_acoustic_synthesize(am, "ba1 da4", "mand", &mel, &stopped) == LRTTS_OK);
  CHECK(lrtts_mel_channels(mel) == 80);
  std::vector<float> buf(static_cast<size_t>(lrtts_mel_frames(mel) * 80));
  CHECK(lrtts_mel_copy(mel, buf.data(), buf.size()) == LRTTS_OK);
  CHECK(lrtts_mel_copy(mel, buf.data(), buf.size() - 1) == LRTTS_INVALID_ARGUMENT);

  // Vocoder trained on the acoustic model's own predictions.
  const std::string manifest = w / "toy/manifest.jsonl";
  const char* ms[] = {manifest.c_str()};
  lrtts_train_options o;
  lrtts_train_options_init(&o);
  o.corpora = ms;
  o.n_corpora = 1;
  o.steps = 1;
  REQUIRE(lrtts_train_voc(w.p, &o, (w / "am.ckpt").c_str(), "voc.ckpt") == LRTTS_OK);
  lrtts_vocoder* voc = nullptr;
  REQUIRE(lrtts_vocoder_load((w / "voc.ckpt").c_str(), &voc) == LRTTS_OK);
  CHECK(lrtts_vocoder_receptive_field(voc) == 4);
  const size_t n = lrtts_vocoder_output_length(voc, mel);
  CHECK(n == static_cast<size_t>(lrtts_mel_frames(mel)) * 200);
  std::vector<int16_t> a(n), b(n);
  size_t written = 0;
  REQUIRE(lrtts_vocoder_generate(voc, mel, 11, 0, a.data(), a.size(), &written) == LRTTS_OK);
  CHECK(written == n);
  REQUIRE(lrtts_vocoder_generate(voc, mel, 11, 0, b.data(), b.size(), &written) == LRTTS_OK);
  CHECK(a == b);

  wo.vocoder = LRTTS_VOCODER_WAVENET;
  wo.vocoder_ckpt = nullptr;
  CHECK(lrtts_tts(w.p, (w / "am.ckpt").c_str(), "ba1", "mand", &wo, "x.wav", &stopped) == LRTTS_INVALID_ARGUMENT);

  lrtts_mel_free(mel);
  lrtts_vocoder_free(voc);
  lrtts_acoustic_free(am);
}

TEST_CASE("report records failures per utterance") {
  Workspace w("report");
  w.Build();
  lrtts_waveform_options wo;
  lrtts_waveform_options_init(&wo);
  wo.griffin_lim_iters = 2;

  std::ofstream(w / "empty.jsonl") << "";
  lrtts_report_summary s;
  REQUIRE(lrtts_report(w.p, (w / "empty.jsonl").c_str(), (w / "am.ckpt").c_str(), &wo, "r0", &s) == LRTTS_OK);
  CHECK(s.utterances == 0);
  CHECK(s.failed == 0);

  // The second line uses a Shanghainese token the model never saw.
  std::string first;
  std::getline(std::istringstream(Slurp(w / "toy/manifest.jsonl")), first);
  std::string oov = first;
  oov.replace(oov.find("\"id\":\""), 6, "\"id\":\"oov_");
  oov.replace(oov.find("\"lang\":\"mand\""), 13, "\"lang\":\"shdia\"");
  std::ofstream(w / "toy/mixed.jsonl") << first << "\n" << oov << "\n";
  REQUIRE(lrtts_report(w.p, (w / "toy/mixed.jsonl").c_str(), (w / "am.ckpt").c_str(), &wo, "r1", &s) == LRTTS_OK);
  CHECK(s.utterances == 2);
  const std::string csv = Slurp(w / "r1/report.csv");
  INFO(csv);
  CHECK(s.failed == 1);
  CHECK(csv.find("oov_") != std::string::npos);
  CHECK(csv.find("failed:") != std::string::npos);
}

TEST_CASE("commands are reproducible") {
  const std::vector<std::string> files = {"toy/manifest.jsonl", "toy/wavs/toy_mand_0003.wav", "vocab.json", "am.ckpt"};
  std::vector<std::string> first;
  {
    Workspace w("det");
    w.Build();
    for (const auto& f : files) first.push_back(Slurp(w / f));
  }
  Workspace w("det");
  w.Build();
  for (size_t i = 0; i < files.size(); ++i) {
    CHECK(!first[i].empty());
    CHECK(Slurp(w / files[i]) == first[i]);
  }
}

TEST_CASE("command line") {
  CHECK(RunCli("no-such-command") == 1);
  CHECK(RunCli("tts --no-such-flag") == 1);
  CHECK(RunCli("--help") == 0);
  CHECK(RunCli("synth-mel --am /nonexistent.ckpt --text ba1 --lang mand --out m.mel") == 1);

  Workspace w("cli");
  w.Build();
  const std::string common = "--config " + (w / "config.json") + " --work-dir " + w.root.string() + " ";
  CHECK(RunCli(common + "tts --am " + (w / "am.ckpt") + " --text \"ba1 da4\" --lang mand --vocoder griffinlim --gl-iters 4 "
                        "--out cli.wav") == 0);
  CHECK(fs::exists(w / "cli.wav"));
}
