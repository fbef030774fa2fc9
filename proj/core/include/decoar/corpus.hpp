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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "decoar/ctc.hpp"
#include "decoar/rng.hpp"

namespace decoar {

struct Utterance {
  std::string utterance_id;
  std::string speaker_id;
  std::string wav_path;  // relative to the manifest directory
  // Absent for the unlabeled pool: the loader withholds transcripts there
  // even if the manifest file carries them, so pretraining code cannot
  // observe labels by construction.
  std::optional<LabelSequence> transcript;
};

// Disjoint splits plus the label vocabulary.
//
// Manifest file: line-oriented, tab-separated columns
//   split  utterance_id  speaker_id  wav_path  transcript(space-joined or -)
// with '#'-prefixed header lines; "# vocab=<relpath>" names the vocabulary
// file. Paths are relative to the manifest's directory.
struct CorpusManifest {
  std::vector<Utterance> unlabeled_pool;
  std::vector<Utterance> labeled_train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
  LabelVocabulary vocabulary;
  std::string vocab_file = "vocab.txt";
  std::string base_dir;  // directory the manifest was loaded from / saved to
  std::string note;

  void save(const std::string& manifest_path) const;
  static CorpusManifest load(const std::string& manifest_path);

  std::string resolve(const std::string& rel_path) const;
};

struct SyntheticConfig {
  std::size_t n_utterances = 200;
  std::size_t n_speakers = 8;
  std::size_t vocab_size = 8;  // 2..26
  std::size_t sample_rate = 16000;
  std::size_t min_symbols = 4;
  std::size_t max_symbols = 9;
  double min_segment_ms = 60.0;
  double max_segment_ms = 200.0;
  // per-speaker vocal-tract factor range; formants scale by it, which CMVN
  // cannot undo, so speaker variability survives normalization. The default
  // spread keeps symbols cleanly separable; widen it to make small labeled
  // subsets undersample speaker variation.
  double vtl_min = 0.95;
  double vtl_max = 1.06;
  // split fractions; remainder goes to the unlabeled pool
  double labeled_fraction = 0.24;
  double dev_fraction = 0.08;
  double test_fraction = 0.08;
};

// Deterministic speech-like corpus. Each symbol has a fixed two-formant
// spectral envelope; odd symbols are noise-like (random component
// frequencies), even ones harmonic. Speakers add a fixed spectral tilt and
// pitch offset, segments get amplitude jitter, and transcripts are the true
// symbol sequences. WAV files are written under <out_dir>/wav/ and the
// manifest/vocabulary into <out_dir>.
CorpusManifest generate_synthetic(const SyntheticConfig& config,
                                  std::uint64_t seed,
                                  const std::string& out_dir);

// Keeps a deterministic `fraction` of labeled_train (the pool and the other
// splits are untouched). Selection preserves the original order.
CorpusManifest split_labeled_fraction(const CorpusManifest& manifest,
                                      double fraction, std::uint64_t seed);

}  // namespace decoar
