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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "decoar/corpus.hpp"
#include "decoar/trainer.hpp"

namespace decoar {

// Plain-text key=value configuration ('#' comments, blank lines ignored).
// Every command snapshots the fully resolved configuration into its output
// directory so a run can be repeated without the original file.
struct RunConfig {
  std::map<std::string, std::string> values;

  static RunConfig load(const std::string& path);  // "" -> defaults only

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value);

  void save(const std::string& path) const;  // sorted key=value lines
};

struct ExperimentSpec {
  std::string manifest_path;
  std::string config_path;  // optional
  std::string features_dir;
  std::string out_dir;
  std::vector<std::uint64_t> seeds{1};
};

DecoarConfig decoar_config_from(const RunConfig& config);
PretrainOptions pretrain_options_from(const RunConfig& config,
                                      std::uint64_t seed);
FinetuneOptions finetune_options_from(const RunConfig& config,
                                      std::uint64_t seed,
                                      std::size_t input_dim,
                                      std::size_t num_classes);

// Loads cached features (features_dir/<utterance_id>.feat) for a split.
std::vector<FeatureSequence> load_split_features(
    const std::vector<Utterance>& split, const std::string& features_dir);

std::vector<LabelSequence> split_targets(const std::vector<Utterance>& split);

// All commands return a process exit code (0 = success) and print progress
// to stdout / problems to stderr.

// Log-mel + per-speaker CMVN over every split; writes one .feat file per
// utterance plus speaker_stats.bin. Unreadable or too-short audio is listed
// in errors.txt and makes the exit code nonzero.
int cmd_features(const std::string& manifest_path, const std::string& out_dir);

// Slice-reconstruction pretraining on the unlabeled pool (dev split for
// model selection). Writes decoar.ckpt (best), decoar_last.ckpt,
// metrics.tsv, config.resolved.
int cmd_pretrain(const ExperimentSpec& spec);

// CTC head training on frozen features of the given kind. encoder_ckpt is
// required for FeatureKind::kDecoar. Writes head.ckpt, metrics.tsv,
// summary.tsv (dev/test PER), config.resolved.
int cmd_finetune(const ExperimentSpec& spec, FeatureKind kind,
                 const std::string& encoder_ckpt);

// PER of a trained head on a split; per-utterance and aggregate S/I/D
// breakdown plus decoded hypotheses.
int cmd_evaluate(const ExperimentSpec& spec, const std::string& head_ckpt,
                 FeatureKind kind, const std::string& encoder_ckpt,
                 const std::string& split, const std::string& decoder,
                 std::size_t beam_width);

// Experiment grids: axis "slice_size" sweeps {12, 18, 22}; axis
// "directionality" sweeps {unidirectional, bidirectional}. Each grid point
// pretrains + finetunes + evaluates per seed on identical corpus splits and
// the table reports seed-averaged dev/test PER.
int cmd_ablate(const ExperimentSpec& spec, const std::string& axis);

// Ground-truth and per-offset reconstructed spectrogram dumps for one
// utterance, plus a per-offset mean L1 error summary.
int cmd_reconstruct(const ExperimentSpec& spec,
                    const std::string& encoder_ckpt,
                    const std::string& utterance_id,
                    const std::vector<std::size_t>& offsets);

}  // namespace decoar
