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

#include "decoar/rnn.hpp"

#include <cmath>
#include <stdexcept>

namespace decoar {

namespace {
constexpr const char* kGateNames[4] = {"i", "f", "g", "o"};
}

LstmLayerParams LstmLayerParams::init(std::size_t input_dim,
                                      std::size_t hidden_dim, Rng& rng) {
  LstmLayerParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (int g = 0; g < 4; ++g) {
    p.w_in[g] = Tensor::uniform({input_dim, hidden_dim}, -bound, bound, rng);
    p.w_in[g].set_requires_grad();
    p.w_rec[g] = Tensor::uniform({hidden_dim, hidden_dim}, -bound, bound, rng);
    p.w_rec[g].set_requires_grad();
    p.bias[g] = Tensor(Shape{1, hidden_dim}, g == 1 ? 1.0 : 0.0);
    p.bias[g].set_requires_grad();
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> LstmLayerParams::named_parameters(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (int g = 0; g < 4; ++g) {
    out.emplace_back(prefix + "w_in." + kGateNames[g], w_in[g]);
    out.emplace_back(prefix + "w_rec." + kGateNames[g], w_rec[g]);
    out.emplace_back(prefix + "bias." + kGateNames[g], bias[g]);
  }
  return out;
}

LstmLayerParams LstmLayerParams::clone() const {
  LstmLayerParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  for (int g = 0; g < 4; ++g) {
    p.w_in[g] = w_in[g].clone();
    p.w_rec[g] = w_rec[g].clone();
    p.bias[g] = bias[g].clone();
  }
  return p;
}

Tensor lstm_forward(const LstmLayerParams& params, const Tensor& inputs,
                    Direction direction) {
  if (inputs.ndim() != 2 || inputs.cols() != params.input_dim) {
    throw std::invalid_argument(
        "lstm_forward: input shape " + shape_str(inputs.shape()) +
        " does not match layer input dim " + std::to_string(params.input_dim));
  }
  const std::size_t steps = inputs.rows();
  const std::size_t h = params.hidden_dim;

  // Pack the four gates into single matrices; gradients split back through
  // the concat.
  const Tensor w_in_packed =
      concat_cols({params.w_in[0], params.w_in[1], params.w_in[2], params.w_in[3]});
  const Tensor w_rec_packed = concat_cols(
      {params.w_rec[0], params.w_rec[1], params.w_rec[2], params.w_rec[3]});
  const Tensor bias_packed =
      concat_cols({params.bias[0], params.bias[1], params.bias[2], params.bias[3]});

  // Input contributions for every step at once: T×4h.
  const Tensor xw = add_bias(matmul(inputs, w_in_packed), bias_packed);

  std::vector<Tensor> outputs(steps);
  Tensor h_prev(Shape{1, h});
  Tensor c_prev(Shape{1, h});
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = direction == Direction::kForward ? s : steps - 1 - s;
    const Tensor gates = add(row(xw, t), matmul(h_prev, w_rec_packed));
    const Tensor gi = sigmoid(cols(gates, 0, h));
    const Tensor gf = sigmoid(cols(gates, h, h));
    const Tensor gg = tanh(cols(gates, 2 * h, h));
    const Tensor go = sigmoid(cols(gates, 3 * h, h));
    const Tensor c = add(mul(gf, c_prev), mul(gi, gg));
    const Tensor ht = mul(go, tanh(c));
    outputs[t] = ht;
    h_prev = ht;
    c_prev = c;
  }
  return concat_rows(outputs);
}

BlstmStack BlstmStack::init(std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t num_layers, bool bidirectional,
                            Rng& rng) {
  BlstmStack stack;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < num_layers; ++l) {
    Rng rf = rng.substream("layer.fwd", l);
    stack.fwd.push_back(LstmLayerParams::init(in, hidden_dim, rf));
    if (bidirectional) {
      Rng rb = rng.substream("layer.bwd", l);
      stack.bwd.push_back(LstmLayerParams::init(in, hidden_dim, rb));
      in = 2 * hidden_dim;
    } else {
      in = hidden_dim;
    }
  }
  return stack;
}

std::vector<std::pair<std::string, Tensor>> BlstmStack::named_parameters(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t l = 0; l < fwd.size(); ++l) {
    const std::string layer = prefix + "layer" + std::to_string(l) + ".";
    for (auto& e : fwd[l].named_parameters(layer + "fwd.")) out.push_back(e);
    if (bidirectional()) {
      for (auto& e : bwd[l].named_parameters(layer + "bwd.")) out.push_back(e);
    }
  }
  return out;
}

BlstmStack BlstmStack::clone() const {
  BlstmStack s;
  for (const auto& l : fwd) s.fwd.push_back(l.clone());
  for (const auto& l : bwd) s.bwd.push_back(l.clone());
  return s;
}

ContextStates blstm_stack_forward(const BlstmStack& stack,
                                  const Tensor& inputs) {
  if (stack.fwd.empty()) {
    throw std::invalid_argument("blstm_stack_forward: empty stack");
  }
  Tensor x = inputs;
  ContextStates states;
  for (std::size_t l = 0; l < stack.num_layers(); ++l) {
    states.forward = lstm_forward(stack.fwd[l], x, Direction::kForward);
    if (stack.bidirectional()) {
      states.backward = lstm_forward(stack.bwd[l], x, Direction::kBackward);
      x = concat_cols({states.forward, states.backward});
    } else {
      x = states.forward;
    }
  }
  return states;
}

}  // namespace decoar
