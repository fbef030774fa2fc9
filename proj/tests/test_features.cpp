// Copyright 2026 The decoar authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "decoar/features.hpp"
#include "decoar/rng.hpp"
#include "decoar/wav.hpp"

using namespace decoar;
namespace fs = std::filesystem;

namespace {

AudioBuffer sine(double freq, double seconds, const std::string& uid = "u0",
                 const std::string& spk = "s0") {
  AudioBuffer a;
  a.utterance_id = uid;
  a.speaker_id = spk;
  a.sample_rate = 16000;
  const auto n = static_cast<std::size_t>(seconds * 16000);
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * freq *
                                  static_cast<double>(i) / 16000.0);
  }
  return a;
}

FeatureSequence seq_of(const std::vector<std::vector<double>>& rows,
                       const std::string& spk = "s0") {
  FeatureSequence s;
  s.frames = Tensor::from_rows(rows);
  s.utterance_id = "u";
  s.speaker_id = spk;
  return s;
}

}  // namespace

TEST_CASE("framing: 1 second at 16 kHz gives 98 frames") {
  const AudioBuffer a = sine(440.0, 1.0);
  const FeatureSequence s = compute_logmel(a);
  // floor((16000 - 400) / 160) + 1
  CHECK(s.num_frames() == 98);
  CHECK(s.dim() == 40);
}

TEST_CASE("framing formula holds for randomized lengths") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 400 + rng.uniform_int(9 * 400);
    AudioBuffer a = sine(300.0, 1.0);
    a.samples.resize(n);
    const FeatureSequence s = compute_logmel(a);
    CHECK(s.num_frames() == (n - 400) / 160 + 1);
  }
}

TEST_CASE("audio shorter than one window is rejected") {
  AudioBuffer a = sine(440.0, 1.0);
  a.samples.resize(399);
  CHECK_THROWS_AS(compute_logmel(a), std::invalid_argument);
}

TEST_CASE("all-zero audio floors every value at log(1e-10)") {
  AudioBuffer a;
  a.utterance_id = "zero";
  a.speaker_id = "s0";
  a.samples.assign(16000, 0.0);
  const FeatureSequence s = compute_logmel(a);
  const double want = std::log(1e-10);
  for (const double v : s.frames.value()) CHECK(v == want);
}

TEST_CASE("pure 440 Hz sine peaks in the mel bin nearest 440 Hz") {
  const FeatureSequence s = compute_logmel(sine(440.0, 0.5));
  const auto centers = mel_center_frequencies(40, 16000.0);
  std::size_t want = 0;
  for (std::size_t m = 1; m < centers.size(); ++m) {
    if (std::abs(centers[m] - 440.0) < std::abs(centers[want] - 440.0)) want = m;
  }
  for (std::size_t t = 0; t < s.num_frames(); ++t) {
    std::size_t got = 0;
    for (std::size_t m = 1; m < 40; ++m) {
      if (s.frames(t, m) > s.frames(t, got)) got = m;
    }
    CHECK(got == want);
  }
}

TEST_CASE("shifting audio by one hop shifts frames by one index") {
  AudioBuffer a = sine(523.0, 0.5);
  Rng rng(3);
  for (double& v : a.samples) v += 0.01 * rng.uniform(-1.0, 1.0);
  AudioBuffer shifted = a;
  shifted.samples.erase(shifted.samples.begin(), shifted.samples.begin() + 160);
  const FeatureSequence s0 = compute_logmel(a);
  const FeatureSequence s1 = compute_logmel(shifted);
  for (std::size_t t = 0; t + 1 < s0.num_frames() && t < s1.num_frames(); ++t) {
    for (std::size_t m = 0; m < 40; ++m) {
      CHECK(s1.frames(t, m) == doctest::Approx(s0.frames(t + 1, m)).epsilon(1e-9));
    }
  }
}

TEST_CASE("speaker stats: toy mean and population variance") {
  const auto stats = accumulate_speaker_stats({seq_of({{1.0}, {3.0}})});
  const SpeakerStats& st = stats.at("s0");
  CHECK(st.mean[0] == doctest::Approx(2.0));
  CHECK(st.variance[0] == doctest::Approx(1.0));
  CHECK(st.frame_count == 2);
}

TEST_CASE("speaker stats: speakers pool independently") {
  const auto stats = accumulate_speaker_stats(
      {seq_of({{1.0}}, "a"), seq_of({{5.0}}, "b"), seq_of({{3.0}}, "a")});
  CHECK(stats.at("a").mean[0] == doctest::Approx(2.0));
  CHECK(stats.at("b").mean[0] == doctest::Approx(5.0));
}

TEST_CASE("constant features hit the variance floor") {
  const auto stats = accumulate_speaker_stats(
      {seq_of({{7.0}, {7.0}, {7.0}})});
  CHECK(stats.at("s0").variance[0] == kVarianceFloor);
  // downstream division stays finite
  const FeatureSequence n = apply_cmvn(seq_of({{7.0}}), stats.at("s0"));
  CHECK(std::isfinite(n.frames(0, 0)));
}

TEST_CASE("already-normalized sequences are rejected by stats accumulation") {
  FeatureSequence s = seq_of({{1.0}});
  s.normalized = true;
  CHECK_THROWS_AS(accumulate_speaker_stats({s}), std::invalid_argument);
}

TEST_CASE("cmvn: toy case, idempotence on pool, and invertibility") {
  SpeakerStats st;
  st.speaker_id = "s0";
  st.mean = {2.0};
  st.variance = {1.0};
  const FeatureSequence n = apply_cmvn(seq_of({{1.0}, {3.0}}), st);
  CHECK(n.frames(0, 0) == doctest::Approx(-1.0));
  CHECK(n.frames(1, 0) == doctest::Approx(1.0));
  CHECK(n.normalized);

  // pooled stats of the normalized pool: mean 0, var 1
  FeatureSequence as_raw = n;
  as_raw.normalized = false;
  const auto renorm = accumulate_speaker_stats({as_raw});
  CHECK(renorm.at("s0").mean[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(renorm.at("s0").variance[0] == doctest::Approx(1.0).epsilon(1e-6));

  // zero-mean unit-variance input passes through unchanged
  SpeakerStats id_stats;
  id_stats.speaker_id = "s0";
  id_stats.mean = {0.0};
  id_stats.variance = {1.0};
  const FeatureSequence same = apply_cmvn(as_raw, id_stats);
  for (std::size_t i = 0; i < same.frames.numel(); ++i) {
    CHECK(same.frames.value()[i] ==
          doctest::Approx(n.frames.value()[i]).epsilon(1e-12));
  }

  // un-apply recovers the input
  Rng rng(5);
  FeatureSequence orig = seq_of({{0.4, -1.2}, {2.2, 0.9}, {-0.3, 0.0}});
  const auto stats = accumulate_speaker_stats({orig});
  const FeatureSequence normed = apply_cmvn(orig, stats.at("s0"));
  for (std::size_t t = 0; t < orig.num_frames(); ++t) {
    for (std::size_t j = 0; j < orig.dim(); ++j) {
      const double undone =
          normed.frames(t, j) * std::sqrt(stats.at("s0").variance[j]) +
          stats.at("s0").mean[j];
      CHECK(undone == doctest::Approx(orig.frames(t, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("cmvn speaker mismatch is a contract error") {
  SpeakerStats st;
  st.speaker_id = "other";
  st.mean = {0.0};
  st.variance = {1.0};
  CHECK_THROWS_AS(apply_cmvn(seq_of({{1.0}}), st), std::invalid_argument);
}

TEST_CASE("wav round-trip and encoding rejection") {
  const fs::path dir = fs::temp_directory_path() / "decoar_wav_test";
  fs::create_directories(dir);
  const AudioBuffer a = sine(200.0, 0.1);
  write_wav((dir / "ok.wav").string(), a.samples, 16000);
  const WavData back = read_wav((dir / "ok.wav").string());
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == a.samples.size());
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    CHECK(back.samples[i] == doctest::Approx(a.samples[i]).epsilon(1e-3));
  }

  // not a wav
  {
    std::ofstream os(dir / "bad.wav", std::ios::binary);
    os << "this is not audio and is long enough to pass the size check ....";
  }
  CHECK_THROWS_WITH_AS(read_wav((dir / "bad.wav").string()),
                       doctest::Contains("not a RIFF/WAVE file"),
                       std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("feature cache round-trip is bit-exact") {
  const fs::path dir = fs::temp_directory_path() / "decoar_cache_test";
  fs::create_directories(dir);
  Rng rng(9);
  FeatureSequence s;
  s.frames = Tensor::uniform({13, 40}, -30.0, 5.0, rng);
  s.utterance_id = "utt0042";
  s.speaker_id = "spk03";
  s.normalized = true;
  const std::string path = (dir / "utt0042.feat").string();
  save_feature_sequence(path, s);
  const FeatureSequence back = load_feature_sequence(path);
  CHECK(back.utterance_id == s.utterance_id);
  CHECK(back.speaker_id == s.speaker_id);
  CHECK(back.normalized == s.normalized);
  REQUIRE(back.frames.shape() == s.frames.shape());
  for (std::size_t i = 0; i < s.frames.numel(); ++i) {
    CHECK(back.frames.value()[i] == s.frames.value()[i]);
  }

  // speaker stats round-trip
  const auto stats = accumulate_speaker_stats({seq_of({{1.0, 2.0}, {3.0, 5.0}})});
  const std::string spath = (dir / "stats.bin").string();
  save_speaker_stats(spath, stats);
  const auto back_stats = load_speaker_stats(spath);
  CHECK(back_stats.at("s0").mean == stats.at("s0").mean);
  CHECK(back_stats.at("s0").variance == stats.at("s0").variance);
  CHECK(back_stats.at("s0").frame_count == stats.at("s0").frame_count);
  fs::remove_all(dir);
}
