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

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "decoar/rng.hpp"
#include "decoar/tensor.hpp"

namespace decoar {

enum class Direction { kForward, kBackward };

// One LSTM layer. Gates are kept per-gate (order: input, forget, cell
// candidate, output) so checkpoints address them individually; the forward
// pass packs them into single matrices for batched matmuls.
struct LstmLayerParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::array<Tensor, 4> w_in;   // each input_dim × hidden_dim
  std::array<Tensor, 4> w_rec;  // each hidden_dim × hidden_dim
  std::array<Tensor, 4> bias;   // each 1 × hidden_dim

  // Weights uniform in (-1/sqrt(hidden), 1/sqrt(hidden)); biases zero except
  // the forget gate, which starts at 1.
  static LstmLayerParams init(std::size_t input_dim, std::size_t hidden_dim,
                              Rng& rng);

  std::vector<std::pair<std::string, Tensor>> named_parameters(
      const std::string& prefix) const;
  LstmLayerParams clone() const;
};

// Zero initial state; sigmoid gates, tanh candidate and output squash.
// Direction::kBackward consumes the sequence reversed and re-reverses the
// result, so row t of the output always refers to input frame t.
Tensor lstm_forward(const LstmLayerParams& params, const Tensor& inputs,
                    Direction direction);

// Stack of (optionally bidirectional) LSTM layers. In the bidirectional case
// layer l > 0 consumes the concatenated forward/backward states of layer
// l - 1; unidirectional stacks chain forward states only.
struct BlstmStack {
  std::vector<LstmLayerParams> fwd;
  std::vector<LstmLayerParams> bwd;  // empty when unidirectional

  bool bidirectional() const { return !bwd.empty(); }
  std::size_t num_layers() const { return fwd.size(); }
  std::size_t hidden_dim() const { return fwd.empty() ? 0 : fwd.back().hidden_dim; }
  // Feature width presented to downstream consumers.
  std::size_t output_dim() const {
    return bidirectional() ? 2 * hidden_dim() : hidden_dim();
  }

  static BlstmStack init(std::size_t input_dim, std::size_t hidden_dim,
                         std::size_t num_layers, bool bidirectional, Rng& rng);

  // Paths look like "<prefix>layer0.fwd.w_in.i".
  std::vector<std::pair<std::string, Tensor>> named_parameters(
      const std::string& prefix) const;
  BlstmStack clone() const;
};

// Last-layer per-direction states, kept separate so callers can index the
// forward state at t and the backward state at t+K independently.
struct ContextStates {
  Tensor forward;   // T×h
  Tensor backward;  // T×h; default-empty for unidirectional stacks
  bool has_backward() const { return backward.numel() > 0; }
};

ContextStates blstm_stack_forward(const BlstmStack& stack, const Tensor& inputs);

}  // namespace decoar
