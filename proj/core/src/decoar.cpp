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

#include "decoar/decoar.hpp"

#include <cmath>
#include <stdexcept>

#include "decoar/checkpoint.hpp"

namespace decoar {

namespace {

void check_offset(const DecoarModel& model, std::size_t offset) {
  if (offset >= model.heads.size()) {
    throw std::invalid_argument("offset " + std::to_string(offset) +
                                " out of range; slice size is " +
                                std::to_string(model.heads.size()));
  }
}

void check_input(const DecoarModel& model, const Tensor& x) {
  if (x.ndim() != 2 || x.cols() != model.config.feature_dim) {
    throw std::invalid_argument("expected T×" +
                                std::to_string(model.config.feature_dim) +
                                " features, got " + shape_str(x.shape()));
  }
}

Tensor apply_head(const FfnHead& head, const Tensor& v) {
  const Tensor hidden = relu(add_bias(matmul(v, head.w1), head.b1));
  return add_bias(matmul(hidden, head.w2), head.b2);
}

}  // namespace

FfnHead FfnHead::init(std::size_t in_dim, std::size_t hidden,
                      std::size_t out_dim, Rng& rng) {
  FfnHead h;
  const double b1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  h.w1 = Tensor::uniform({in_dim, hidden}, -b1, b1, rng);
  h.b1 = Tensor(Shape{1, hidden});
  h.w2 = Tensor::uniform({hidden, out_dim}, -b2, b2, rng);
  h.b2 = Tensor(Shape{1, out_dim});
  for (Tensor* t : {&h.w1, &h.b1, &h.w2, &h.b2}) t->set_requires_grad();
  return h;
}

FfnHead FfnHead::clone() const {
  FfnHead h;
  h.w1 = w1.clone();
  h.b1 = b1.clone();
  h.w2 = w2.clone();
  h.b2 = b2.clone();
  return h;
}

DecoarModel DecoarModel::init(const DecoarConfig& config, Rng& rng) {
  if (config.slice_size < 1) {
    throw std::invalid_argument("DecoarModel: slice_size must be >= 1");
  }
  DecoarModel m;
  m.config = config;
  Rng enc_rng = rng.substream("encoder");
  m.encoder = BlstmStack::init(config.feature_dim, config.encoder_hidden,
                               config.encoder_layers, config.bidirectional,
                               enc_rng);
  for (std::size_t i = 0; i < config.slice_size; ++i) {
    Rng head_rng = rng.substream("head", i);
    m.heads.push_back(FfnHead::init(config.context_dim(), config.ffn_hidden,
                                    config.feature_dim, head_rng));
  }
  return m;
}

std::vector<std::pair<std::string, Tensor>> DecoarModel::named_parameters()
    const {
  auto out = encoder.named_parameters("decoar.encoder.");
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const std::string p = "decoar.head" + std::to_string(i) + ".";
    out.emplace_back(p + "w1", heads[i].w1);
    out.emplace_back(p + "b1", heads[i].b1);
    out.emplace_back(p + "w2", heads[i].w2);
    out.emplace_back(p + "b2", heads[i].b2);
  }
  return out;
}

DecoarModel DecoarModel::clone() const {
  DecoarModel m;
  m.config = config;
  m.encoder = encoder.clone();
  for (const auto& h : heads) m.heads.push_back(h.clone());
  return m;
}

void DecoarModel::save(const std::string& path) const {
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.emplace_back(
      "decoar.config",
      Tensor(Shape{6}, {static_cast<double>(config.slice_size),
                        static_cast<double>(config.feature_dim),
                        static_cast<double>(config.encoder_layers),
                        static_cast<double>(config.encoder_hidden),
                        static_cast<double>(config.ffn_hidden),
                        config.bidirectional ? 1.0 : 0.0}));
  for (auto& e : named_parameters()) entries.push_back(e);
  save_checkpoint(path, entries);
}

DecoarModel DecoarModel::load(const std::string& path) {
  const auto entries = load_checkpoint_map(path);
  const auto cfg_it = entries.find("decoar.config");
  if (cfg_it == entries.end()) {
    throw std::runtime_error("checkpoint '" + path + "': missing decoar.config");
  }
  const auto cv = cfg_it->second.value();
  DecoarConfig config;
  config.slice_size = static_cast<std::size_t>(cv[0]);
  config.feature_dim = static_cast<std::size_t>(cv[1]);
  config.encoder_layers = static_cast<std::size_t>(cv[2]);
  config.encoder_hidden = static_cast<std::size_t>(cv[3]);
  config.ffn_hidden = static_cast<std::size_t>(cv[4]);
  config.bidirectional = cv[5] != 0.0;

  Rng rng(0);
  DecoarModel m = DecoarModel::init(config, rng);
  for (auto& [name, param] : m.named_parameters()) {
    const auto it = entries.find(name);
    if (it == entries.end()) {
      throw std::runtime_error("checkpoint '" + path + "': missing parameter " + name);
    }
    param.copy_value_from(it->second);
  }
  return m;
}

Tensor ffn_head(const DecoarModel& model, std::size_t offset, const Tensor& v) {
  check_offset(model, offset);
  if (v.ndim() != 2 || v.cols() != model.config.context_dim()) {
    throw std::invalid_argument("ffn_head: context shape " +
                                shape_str(v.shape()) + " does not match dim " +
                                std::to_string(model.config.context_dim()));
  }
  return apply_head(model.heads[offset], v);
}

Tensor slice_contexts(const DecoarConfig& config, const ContextStates& states) {
  const std::size_t steps = states.forward.rows();
  const std::size_t k = config.k();
  if (steps <= k) {
    throw std::invalid_argument("slice_contexts: sequence length " +
                                std::to_string(steps) +
                                " must exceed K = " + std::to_string(k));
  }
  const std::size_t positions = steps - k;
  Tensor fwd_part = rows(states.forward, 0, positions);
  if (!config.bidirectional) return fwd_part;
  return concat_cols({fwd_part, rows(states.backward, k, positions)});
}

Tensor slice_loss(const DecoarModel& model, const ContextStates& states,
                  const Tensor& x, std::size_t t) {
  check_input(model, x);
  const std::size_t steps = x.rows();
  const std::size_t k = model.config.k();
  if (steps <= k || t > steps - k - 1) {
    throw std::invalid_argument(
        "slice_loss: start " + std::to_string(t) + " out of range for T = " +
        std::to_string(steps) + ", K = " + std::to_string(k));
  }
  Tensor context =
      model.config.bidirectional
          ? concat_cols({row(states.forward, t), row(states.backward, t + k)})
          : row(states.forward, t);
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i <= k; ++i) {
    const Tensor pred = apply_head(model.heads[i], context);
    total = add(total, sum(abs(sub(row(x, t + i), pred))));
  }
  return total;
}

Tensor utterance_loss(const DecoarModel& model, const Tensor& x) {
  check_input(model, x);
  const std::size_t steps = x.rows();
  const std::size_t k = model.config.k();
  if (steps <= k) {
    throw std::invalid_argument("utterance_loss: sequence length " +
                                std::to_string(steps) +
                                " must exceed K = " + std::to_string(k));
  }
  const ContextStates states = blstm_stack_forward(model.encoder, x);
  const Tensor contexts = slice_contexts(model.config, states);
  const std::size_t positions = steps - k;
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i <= k; ++i) {
    const Tensor pred = apply_head(model.heads[i], contexts);
    const Tensor target = rows(x, i, positions);
    total = add(total, sum(abs(sub(target, pred))));
  }
  return total;
}

Tensor extract_decoar_features(const DecoarModel& model, const Tensor& x) {
  check_input(model, x);
  NoGradScope frozen;
  const ContextStates states = blstm_stack_forward(model.encoder, x);
  if (!model.config.bidirectional) return states.forward;
  return concat_cols({states.forward, states.backward});
}

Tensor reconstruct_spectrogram(const DecoarModel& model, const Tensor& x,
                               std::size_t offset) {
  check_input(model, x);
  check_offset(model, offset);
  NoGradScope frozen;
  const ContextStates states = blstm_stack_forward(model.encoder, x);
  const Tensor contexts = slice_contexts(model.config, states);
  return apply_head(model.heads[offset], contexts);
}

}  // namespace decoar
