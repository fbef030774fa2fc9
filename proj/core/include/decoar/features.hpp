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

#include <map>
#include <string>
#include <vector>

#include "decoar/tensor.hpp"

namespace decoar {

struct AudioBuffer {
  std::vector<double> samples;  // in [-1, 1]
  std::size_t sample_rate = 16000;
  std::string utterance_id;
  std::string speaker_id;
};

// T×d matrix of log-mel frames for one utterance.
struct FeatureSequence {
  Tensor frames;  // T×d
  std::string utterance_id;
  std::string speaker_id;
  bool normalized = false;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

struct SpeakerStats {
  std::string speaker_id;
  std::vector<double> mean;
  std::vector<double> variance;  // population variance, floored
  std::size_t frame_count = 0;
};

// Analysis settings. The paper-level values (25 ms window, 10 ms hop,
// 40 mels) are the defaults; window function is periodic Hann, the DFT size
// is the next power of two >= window length, mel filters are unit-peak
// triangles spaced on mel(f) = 2595*log10(1 + f/700) from 0 Hz to Nyquist,
// and the output is the natural log of mel magnitudes floored at 1e-10.
struct LogMelConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_mels = 40;
  double floor = 1e-10;
};

constexpr double kVarianceFloor = 1e-8;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequencies (Hz) of the triangular mel filters.
std::vector<double> mel_center_frequencies(std::size_t n_mels,
                                           double sample_rate);

// Frame count for n samples with window w and hop h (all in samples):
// floor((n - w)/h) + 1.
std::size_t frame_count(std::size_t n_samples, std::size_t window,
                        std::size_t hop);

// Unnormalized log-mel features. Throws if the audio is shorter than one
// analysis window.
FeatureSequence compute_logmel(const AudioBuffer& audio,
                               const LogMelConfig& config = {});

// Pooled per-speaker, per-dimension mean and population variance over all
// frames of all sequences. Inputs must be unnormalized.
std::map<std::string, SpeakerStats> accumulate_speaker_stats(
    const std::vector<FeatureSequence>& sequences);

// (x - mean) / sqrt(variance), dimension-wise. The stats speaker must match
// the sequence speaker.
FeatureSequence apply_cmvn(const FeatureSequence& seq,
                           const SpeakerStats& stats);

// --- feature cache ----------------------------------------------------------
//
// One file per utterance. Layout (little-endian):
//   magic "DFBK", version u32 (=1)
//   uid_len u32, uid bytes; spk_len u32, spk bytes
//   normalized u32 (0/1), T u64, d u64
//   payload f64[T*d], row-major
void save_feature_sequence(const std::string& path, const FeatureSequence& seq);
FeatureSequence load_feature_sequence(const std::string& path);

void save_speaker_stats(const std::string& path,
                        const std::map<std::string, SpeakerStats>& stats);
std::map<std::string, SpeakerStats> load_speaker_stats(const std::string& path);

}  // namespace decoar
