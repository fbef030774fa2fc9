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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "decoar/rnn.hpp"
#include "decoar/tensor.hpp"

namespace decoar {

// Ordered label set; the blank symbol is implicit at index size().
struct LabelVocabulary {
  std::vector<std::string> symbols;

  std::size_t blank() const { return symbols.size(); }
  std::size_t num_classes() const { return symbols.size() + 1; }
  std::size_t index_of(const std::string& symbol) const;

  // File format: one symbol per line, UTF-8; blank implicit at index |V|.
  static LabelVocabulary load(const std::string& path);
  void save(const std::string& path) const;
};

// Symbol indices without blanks.
using LabelSequence = std::vector<std::size_t>;

// Raised when the target cannot be aligned to the available frames
// (T < |target| + number of repeated adjacent pairs); the likelihood would
// be exactly zero, i.e. infinite loss.
class InfeasibleAlignmentError : public std::runtime_error {
 public:
  InfeasibleAlignmentError(std::size_t frames, std::size_t required)
      : std::runtime_error("ctc: target needs at least " +
                           std::to_string(required) + " frames, got " +
                           std::to_string(frames)),
        frames(frames),
        required(required) {}
  std::size_t frames;
  std::size_t required;
};

// Row-wise log-softmax (pure, no gradient recording).
Tensor log_softmax_rows(const Tensor& logits);

// Negative log-likelihood of `target` under per-frame log-probabilities
// (T × num_classes, rows already log-softmax-normalized, blank last).
// Log-space forward DP over the blank-interleaved extended label sequence.
double ctc_loss(const Tensor& log_probs, const LabelSequence& target);

// Gradient of the loss w.r.t. the *logits* that produced log_probs:
// softmax - occupancy, from the forward-backward posteriors.
Tensor ctc_grad(const Tensor& log_probs, const LabelSequence& target);

// Differentiable node: takes raw logits, normalizes internally, records the
// analytic gradient on the active tape.
Tensor ctc_loss_node(const Tensor& logits, const LabelSequence& target);

// Per-frame argmax, collapse repeats, drop blanks.
LabelSequence greedy_decode(const Tensor& log_probs);

// Prefix beam search over blank/non-blank prefix probabilities. With a beam
// at least as large as the number of reachable prefixes this is exact
// marginalization. Ties break lexicographically.
LabelSequence prefix_beam_decode(const Tensor& log_probs,
                                 std::size_t beam_width);

struct EditCounts {
  std::size_t distance = 0;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
};

// Levenshtein alignment with unit costs. When several alignments are optimal
// the backtrace prefers substitution/match, then deletion, then insertion.
EditCounts edit_distance(const LabelSequence& ref, const LabelSequence& hyp);

// distance / |ref|; +infinity when the reference is empty but the
// hypothesis is not.
double error_rate(const EditCounts& counts, std::size_t ref_len);

// Downstream ASR head: projection, 2-layer BLSTM, affine to |V|+1 logits.
// The same head shape serves both feature kinds; only input_dim changes.
struct CtcHeadConfig {
  std::size_t input_dim = 0;
  std::size_t proj_dim = 64;
  std::size_t hidden = 64;  // per direction
  std::size_t layers = 2;
  std::size_t num_classes = 0;  // |V| + 1
};

struct CtcHead {
  CtcHeadConfig config;
  Tensor proj_w, proj_b;
  BlstmStack blstm;
  Tensor out_w, out_b;

  static CtcHead init(const CtcHeadConfig& config, Rng& rng);

  // T × num_classes logits.
  Tensor logits(const Tensor& features) const;

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  CtcHead clone() const;

  void save(const std::string& path) const;
  static CtcHead load(const std::string& path);
};

}  // namespace decoar
