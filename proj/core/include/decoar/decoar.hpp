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

#include <string>
#include <utility>
#include <vector>

#include "decoar/rnn.hpp"
#include "decoar/tensor.hpp"

namespace decoar {

// Slice-reconstruction pretraining: a BLSTM encoder reads the whole feature
// sequence; for every start position t, the pair of states flanking the
// slice, [fwd_t ; bwd_{t+K}], is fed to K+1 position-dependent feed-forward
// heads, head i predicting frame t+i. The training loss is the L1
// reconstruction error summed over offsets, dimensions, and all T-K slice
// positions. With a unidirectional encoder the context is fwd_t alone.
struct DecoarConfig {
  std::size_t slice_size = 18;  // K+1 frames per slice
  std::size_t feature_dim = 40;
  std::size_t encoder_layers = 2;
  std::size_t encoder_hidden = 64;  // per direction
  std::size_t ffn_hidden = 512;
  bool bidirectional = true;

  std::size_t k() const { return slice_size - 1; }
  std::size_t context_dim() const {
    return bidirectional ? 2 * encoder_hidden : encoder_hidden;
  }
};

// One reconstruction head: W2·relu(W1·v + b1) + b2.
struct FfnHead {
  Tensor w1;  // context_dim × ffn_hidden
  Tensor b1;  // 1 × ffn_hidden
  Tensor w2;  // ffn_hidden × feature_dim
  Tensor b2;  // 1 × feature_dim

  static FfnHead init(std::size_t in_dim, std::size_t hidden,
                      std::size_t out_dim, Rng& rng);
  FfnHead clone() const;
};

struct DecoarModel {
  DecoarConfig config;
  BlstmStack encoder;
  std::vector<FfnHead> heads;  // K+1 heads, one per offset

  static DecoarModel init(const DecoarConfig& config, Rng& rng);

  // Paths: decoar.encoder.layer{l}.{fwd,bwd}.{w_in,w_rec,bias}.{i,f,g,o}
  // and decoar.head{i}.{w1,b1,w2,b2}.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  DecoarModel clone() const;

  void save(const std::string& path) const;
  static DecoarModel load(const std::string& path);
};

// Applies head `offset` to one or more context rows (n × context_dim ->
// n × feature_dim). Throws if offset > K.
Tensor ffn_head(const DecoarModel& model, std::size_t offset, const Tensor& v);

// Context rows for every slice position: row t is [fwd_t ; bwd_{t+K}]
// ((T-K) × context_dim). For unidirectional encoders, fwd_t alone.
Tensor slice_contexts(const DecoarConfig& config, const ContextStates& states);

// L1 reconstruction loss of the single slice starting at 0-based position t:
// sum over offsets i in [0, K] and feature dimensions of
// |x_{t+i} - head_i(context_t)|.
Tensor slice_loss(const DecoarModel& model, const ContextStates& states,
                  const Tensor& x, std::size_t t);

// Total loss over all T-K slice positions; the encoder runs once and all
// heads evaluate every position in one batched pass.
Tensor utterance_loss(const DecoarModel& model, const Tensor& x);

// Frozen feature extraction: row t is [fwd_t ; bwd_t] from the last encoder
// layer (fwd_t alone when unidirectional). Runs outside any tape, so no
// gradient ever reaches the encoder through these features.
Tensor extract_decoar_features(const DecoarModel& model, const Tensor& x);

// Reconstruction of the spectrogram as seen by head `offset`: row t is
// head_offset(context_t), the prediction of frame t+offset. (T-K) × d.
Tensor reconstruct_spectrogram(const DecoarModel& model, const Tensor& x,
                               std::size_t offset);

}  // namespace decoar
