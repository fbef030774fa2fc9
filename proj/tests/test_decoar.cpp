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

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "decoar/decoar.hpp"
#include "oracles.hpp"

using namespace decoar;

namespace {

DecoarConfig toy_config(std::size_t slice, std::size_t dim, std::size_t hidden,
                        bool bidirectional = true) {
  DecoarConfig c;
  c.slice_size = slice;
  c.feature_dim = dim;
  c.encoder_layers = 2;
  c.encoder_hidden = hidden;
  c.ffn_hidden = 8;
  c.bidirectional = bidirectional;
  return c;
}

void zero_all(DecoarModel& m) {
  for (auto& [name, p] : m.named_parameters()) {
    Tensor t = p;
    std::fill(t.value().begin(), t.value().end(), 0.0);
  }
}

// Straight-line recomputation of the slice objective with raw loops; no
// tensor ops involved beyond reading values.
double brute_force_slice_loss(const DecoarModel& m, const ContextStates& s,
                              const Tensor& x, std::size_t t) {
  const std::size_t k = m.config.k();
  const std::size_t ctx_dim = m.config.context_dim();
  std::vector<double> ctx(ctx_dim);
  const std::size_t h = m.config.encoder_hidden;
  for (std::size_t j = 0; j < h; ++j) ctx[j] = s.forward(t, j);
  if (m.config.bidirectional) {
    for (std::size_t j = 0; j < h; ++j) ctx[h + j] = s.backward(t + k, j);
  }
  double loss = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const FfnHead& head = m.heads[i];
    const std::size_t hid = head.w1.cols();
    std::vector<double> hidden(hid, 0.0);
    for (std::size_t q = 0; q < hid; ++q) {
      double acc = head.b1(0, q);
      for (std::size_t j = 0; j < ctx_dim; ++j) acc += ctx[j] * head.w1(j, q);
      hidden[q] = acc > 0.0 ? acc : 0.0;
    }
    for (std::size_t d = 0; d < m.config.feature_dim; ++d) {
      double pred = head.b2(0, d);
      for (std::size_t q = 0; q < hid; ++q) pred += hidden[q] * head.w2(q, d);
      loss += std::abs(x(t + i, d) - pred);
    }
  }
  return loss;
}

}  // namespace

TEST_CASE("ffn head: zero parameters give the zero vector") {
  Rng rng(1);
  DecoarModel m = DecoarModel::init(toy_config(3, 4, 3), rng);
  zero_all(m);
  const Tensor out = ffn_head(m, 1, Tensor(Shape{1, 6}));
  for (const double v : out.value()) CHECK(v == 0.0);
}

TEST_CASE("ffn head: identity weights reduce to relu") {
  // square dims so W1 = W2 = I is expressible
  DecoarConfig c = toy_config(1, 4, 2);
  c.ffn_hidden = 4;
  Rng rng(2);
  DecoarModel m = DecoarModel::init(c, rng);
  zero_all(m);
  FfnHead& head = m.heads[0];
  for (std::size_t i = 0; i < 4; ++i) {
    head.w1.at(i, i) = 1.0;
    head.w2.at(i, i) = 1.0;
  }
  const Tensor v = Tensor::row_vector({-1.0, 2.0, -0.5, 3.0});
  const Tensor out = ffn_head(m, 0, v);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == 2.0);
  CHECK(out(0, 2) == 0.0);
  CHECK(out(0, 3) == 3.0);
}

TEST_CASE("ffn head: offset out of range") {
  Rng rng(3);
  DecoarModel m = DecoarModel::init(toy_config(3, 4, 3), rng);
  CHECK_THROWS_AS(ffn_head(m, 3, Tensor(Shape{1, 6})), std::invalid_argument);
  CHECK_THROWS_AS(reconstruct_spectrogram(m, Tensor(Shape{8, 4}), 3),
                  std::invalid_argument);
}

TEST_CASE("ffn head gradient check") {
  Rng rng(4);
  DecoarModel m = DecoarModel::init(toy_config(2, 3, 2), rng);
  Tensor v = Tensor::uniform({1, 4}, -2.0, 2.0, rng);
  v.set_requires_grad();
  auto loss_of = [&]() { return sum(abs(ffn_head(m, 1, v))); };
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(loss_of());
  }
  auto forward = [&]() { return loss_of().scalar_value(); };
  FfnHead& h = m.heads[1];
  for (Tensor* p : {&h.w1, &h.b1, &h.w2, &h.b2, &v}) {
    CHECK(oracles::max_grad_error(forward, *p, p->grad()) < 1e-4);
  }
}

TEST_CASE("slice loss is zero under exact reconstruction") {
  // constant features and heads rigged to predict that constant
  DecoarConfig c = toy_config(3, 2, 3);
  Rng rng(5);
  DecoarModel m = DecoarModel::init(c, rng);
  zero_all(m);
  Tensor x(Shape{6, 2});
  for (std::size_t t = 0; t < 6; ++t) {
    x.at(t, 0) = 0.7;
    x.at(t, 1) = -1.3;
  }
  for (auto& head : m.heads) {
    head.b2.at(0, 0) = 0.7;
    head.b2.at(0, 1) = -1.3;
  }
  const ContextStates s = blstm_stack_forward(m.encoder, x);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(slice_loss(m, s, x, t).scalar_value() == 0.0);
  }
  CHECK(utterance_loss(m, x).scalar_value() == 0.0);
}

TEST_CASE("K=0: slice loss is a single absolute difference") {
  DecoarConfig c = toy_config(1, 1, 2);
  Rng rng(6);
  DecoarModel m = DecoarModel::init(c, rng);
  zero_all(m);
  m.heads[0].b2.at(0, 0) = 0.25;  // prediction p
  Tensor x(Shape{1, 1});
  x.at(0, 0) = -1.0;
  const ContextStates s = blstm_stack_forward(m.encoder, x);
  CHECK(slice_loss(m, s, x, 0).scalar_value() ==
        doctest::Approx(std::abs(-1.0 - 0.25)).epsilon(1e-12));
}

TEST_CASE("slice loss equals brute-force recomputation (T=6, K=2, d=3)") {
  Rng rng(7);
  DecoarModel m = DecoarModel::init(toy_config(3, 3, 4), rng);
  const Tensor x = Tensor::uniform({6, 3}, -2.0, 2.0, rng);
  const ContextStates s = blstm_stack_forward(m.encoder, x);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(slice_loss(m, s, x, t).scalar_value() ==
          doctest::Approx(brute_force_slice_loss(m, s, x, t)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(slice_loss(m, s, x, 4), std::invalid_argument);
}

TEST_CASE("utterance loss sums T-K slice terms") {
  Rng rng(8);
  // T=10, K=2: exactly 8 terms
  DecoarModel m = DecoarModel::init(toy_config(3, 2, 3), rng);
  const Tensor x = Tensor::uniform({10, 2}, -2.0, 2.0, rng);
  const ContextStates s = blstm_stack_forward(m.encoder, x);
  double per_slice_sum = 0.0;
  std::size_t terms = 0;
  for (std::size_t t = 0; t + m.config.k() < 10; ++t) {
    per_slice_sum += slice_loss(m, s, x, t).scalar_value();
    ++terms;
  }
  CHECK(terms == 8);
  CHECK(utterance_loss(m, x).scalar_value() ==
        doctest::Approx(per_slice_sum).epsilon(1e-10));

  // boundary: T = K+1 has exactly one term
  const Tensor x1 = Tensor::uniform({3, 2}, -2.0, 2.0, rng);
  const ContextStates s1 = blstm_stack_forward(m.encoder, x1);
  CHECK(utterance_loss(m, x1).scalar_value() ==
        doctest::Approx(slice_loss(m, s1, x1, 0).scalar_value()).epsilon(1e-10));
}

TEST_CASE("compositional identity holds for randomized T and K") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t slice = 1 + rng.uniform_int(4);
    const std::size_t steps = slice + rng.uniform_int(6);
    DecoarModel m = DecoarModel::init(toy_config(slice, 2, 3), rng);
    const Tensor x = Tensor::uniform({steps, 2}, -2.0, 2.0, rng);
    const ContextStates s = blstm_stack_forward(m.encoder, x);
    double acc = 0.0;
    for (std::size_t t = 0; t + m.config.k() < steps; ++t) {
      acc += slice_loss(m, s, x, t).scalar_value();
    }
    CHECK(utterance_loss(m, x).scalar_value() ==
          doctest::Approx(acc).epsilon(1e-10));
  }
}

TEST_CASE("T <= K is an input error naming both values") {
  Rng rng(10);
  DecoarModel m = DecoarModel::init(toy_config(6, 2, 3), rng);
  const Tensor x = Tensor::uniform({4, 2}, -2.0, 2.0, rng);
  CHECK_THROWS_WITH_AS(utterance_loss(m, x),
                       "utterance_loss: sequence length 4 must exceed K = 5",
                       std::invalid_argument);
}

TEST_CASE("utterance loss is non-negative") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    DecoarModel m = DecoarModel::init(toy_config(3, 2, 3), rng);
    const Tensor x = Tensor::uniform({7, 2}, -2.0, 2.0, rng);
    CHECK(utterance_loss(m, x).scalar_value() >= 0.0);
  }
}

TEST_CASE("utterance loss gradients match finite differences (T=8, K=2, h=4)") {
  Rng rng(12);
  DecoarModel m = DecoarModel::init(toy_config(3, 3, 4), rng);
  const Tensor x = Tensor::uniform({8, 3}, -2.0, 2.0, rng);

  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(utterance_loss(m, x));
  }
  auto forward = [&]() { return utterance_loss(m, x).scalar_value(); };
  // random subset of 20 parameter entries across all tensors
  const auto params = m.named_parameters();
  Rng pick(13);
  for (int probe = 0; probe < 20; ++probe) {
    Tensor p = params[pick.uniform_int(params.size())].second;
    const std::size_t idx = pick.uniform_int(p.numel());
    const double fd = oracles::finite_difference(forward, p, idx);
    CHECK(oracles::rel_err(p.grad()[idx], fd) < 1e-4);
  }
}

TEST_CASE("heads share no parameters: per-head losses have isolated gradients") {
  Rng rng(14);
  DecoarModel m = DecoarModel::init(toy_config(3, 2, 3), rng);
  const Tensor x = Tensor::uniform({7, 2}, -2.0, 2.0, rng);

  // full objective
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(utterance_loss(m, x));
  }
  std::vector<double> full_w1_grad(m.heads[2].w1.grad().begin(),
                                   m.heads[2].w1.grad().end());
  for (auto& [name, p] : m.named_parameters()) Tensor(p).zero_grad();

  // only head 2's terms: realized by slicing the model down to offset 2
  {
    Tape t2;
    TapeScope scope(t2);
    const ContextStates s = blstm_stack_forward(m.encoder, x);
    const Tensor contexts = slice_contexts(m.config, s);
    const Tensor pred = ffn_head(m, 2, contexts);
    const Tensor target = rows(x, 2, 5);
    t2.backward(sum(abs(sub(target, pred))));
  }
  const auto iso = m.heads[2].w1.grad();
  for (std::size_t i = 0; i < iso.size(); ++i) {
    CHECK(iso[i] == doctest::Approx(full_w1_grad[i]).epsilon(1e-12));
  }
  // heads j != 2 receive nothing from head 2's loss
  for (const std::size_t j : {0, 1}) {
    if (m.heads[j].w1.has_grad()) {
      for (const double g : m.heads[j].w1.grad()) CHECK(g == 0.0);
    }
  }
}

TEST_CASE("extracted features have width 2h and match encoder states") {
  Rng rng(15);
  DecoarModel m = DecoarModel::init(toy_config(3, 4, 5), rng);
  const Tensor x = Tensor::uniform({6, 4}, -2.0, 2.0, rng);
  const Tensor f = extract_decoar_features(m, x);
  CHECK(f.shape() == Shape{6, 10});
  CHECK_FALSE(f.on_graph());
  const ContextStates s = blstm_stack_forward(m.encoder, x);
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(f(t, j) == s.forward(t, j));
      CHECK(f(t, 5 + j) == s.backward(t, j));
    }
  }
}

TEST_CASE("reconstruction has shape (T-K)×d and finite values") {
  Rng rng(16);
  DecoarModel m = DecoarModel::init(toy_config(4, 3, 4), rng);
  const Tensor x = Tensor::uniform({9, 3}, -2.0, 2.0, rng);
  const Tensor r = reconstruct_spectrogram(m, x, 2);
  CHECK(r.shape() == Shape{6, 3});
  for (const double v : r.value()) CHECK(std::isfinite(v));
}

TEST_CASE("masking semantics: bidirectional encoder sees the slice interior") {
  Rng rng(17);
  DecoarModel m = DecoarModel::init(toy_config(4, 3, 4, true), rng);
  Tensor x = Tensor::uniform({10, 3}, -2.0, 2.0, rng);
  const Tensor base = reconstruct_spectrogram(m, x, 1);
  Tensor poked = x.clone();
  poked.at(2, 1) += 0.5;  // interior of the slice starting at t=0 (frames 1..K-1)
  const Tensor after = reconstruct_spectrogram(m, poked, 1);
  // prediction of frame 0+1 from slice position 0 changes: no input masking
  bool changed = false;
  for (std::size_t j = 0; j < 3; ++j) {
    if (after(0, j) != base(0, j)) changed = true;
  }
  CHECK(changed);
}

TEST_CASE("masking semantics: unidirectional context at t ignores later frames") {
  Rng rng(18);
  DecoarModel m = DecoarModel::init(toy_config(4, 3, 4, false), rng);
  Tensor x = Tensor::uniform({10, 3}, -2.0, 2.0, rng);
  const Tensor base = reconstruct_spectrogram(m, x, 1);
  Tensor poked = x.clone();
  poked.at(1, 0) += 0.5;  // frames t+1..t+K-1 for the slice at t=0
  poked.at(2, 2) -= 0.3;
  const Tensor after = reconstruct_spectrogram(m, poked, 1);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(after(0, j) == base(0, j));  // bitwise: context cut at t=0
  }
  // later positions whose context includes the poke do change
  bool changed = false;
  for (std::size_t j = 0; j < 3; ++j) {
    if (after(3, j) != base(3, j)) changed = true;
  }
  CHECK(changed);
}

TEST_CASE("model checkpoint round-trip preserves config and parameters") {
  Rng rng(19);
  const DecoarModel m = DecoarModel::init(toy_config(3, 4, 5, false), rng);
  const std::string path = "decoar_model_test.ckpt";
  m.save(path);
  const DecoarModel back = DecoarModel::load(path);
  CHECK(back.config.slice_size == 3);
  CHECK(back.config.bidirectional == false);
  CHECK(back.config.encoder_hidden == 5);
  const auto a = m.named_parameters();
  const auto b = back.named_parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    for (std::size_t j = 0; j < a[i].second.numel(); ++j) {
      CHECK(a[i].second.value()[j] == b[i].second.value()[j]);
    }
  }
  std::remove(path.c_str());
}
