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
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "decoar/ctc.hpp"
#include "decoar/decoar.hpp"
#include "decoar/features.hpp"
#include "decoar/tensor.hpp"

namespace decoar {

// Linear warmup then inverse square-root decay:
// lr(step) = base_lr * min(step / warmup, sqrt(warmup / step)), step >= 1.
// The peak base_lr is reached exactly at step == warmup_steps.
struct NoamSchedule {
  double base_lr = 0.001;
  std::size_t warmup_steps = 500;

  double lr_at(std::size_t step) const;
};

double lr_at(const NoamSchedule& schedule, std::size_t step);

using ParamList = std::vector<std::pair<std::string, Tensor>>;

// p <- p - lr * grad for every parameter whose path is not in `frozen`.
// Parameters without an accumulated gradient are left untouched. A NaN
// gradient aborts with the parameter path in the message.
void sgd_step(const ParamList& params, double lr,
              const std::set<std::string>& frozen = {});

// Scales gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm. max_norm <= 0 disables clipping.
double clip_grad_norm(const ParamList& params, double max_norm);

void zero_grads(const ParamList& params);

// Length-bucketed batches: utterances are sorted by length, grouped into
// batches of at most batch_size whose max/min length ratio stays <= 2, and
// the batch order is shuffled deterministically per (seed, epoch).
struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;

  static BatchPlan build(const std::vector<std::size_t>& lengths,
                         std::size_t batch_size, std::uint64_t seed,
                         std::size_t epoch);
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;
  double mean_loss = 0.0;
  double dev_metric = 0.0;
  double lr = 0.0;
};

// Mutable training position; serialized with checkpoints so an interrupted
// run resumes bit-exactly, including mid-epoch.
struct TrainState {
  std::size_t epoch = 0;  // 0-based while running
  std::size_t batch_index = 0;
  std::size_t step = 0;
  double epoch_loss_sum = 0.0;
  std::size_t epoch_loss_terms = 0;
  double best_dev = std::numeric_limits<double>::infinity();
};

struct PretrainOptions {
  DecoarConfig model;
  NoamSchedule schedule;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double clip_norm = 5.0;  // global L2; <= 0 disables
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

// Slice-reconstruction pretraining over an unlabeled pool. Sequences
// shorter than slice_size are skipped and counted.
class PretrainTrainer {
 public:
  PretrainTrainer(std::vector<FeatureSequence> pool,
                  std::vector<FeatureSequence> dev, PretrainOptions options);

  // Runs one optimizer step. Returns false once all epochs are done.
  bool step_batch();
  bool finished() const;
  void run(std::ostream* metrics_log = nullptr);

  const DecoarModel& model() const { return model_; }
  // Model with the lowest dev reconstruction loss seen so far.
  const DecoarModel& best_model() const { return best_model_; }
  const std::vector<EpochMetrics>& curve() const { return curve_; }
  const TrainState& state() const { return state_; }
  std::size_t skipped_short() const { return skipped_short_; }

  void save_checkpoint(const std::string& path) const;
  static PretrainTrainer restore(const std::string& path,
                                 std::vector<FeatureSequence> pool,
                                 std::vector<FeatureSequence> dev,
                                 PretrainOptions options);

  double dev_loss() const;

 private:
  void finish_epoch(std::ostream* metrics_log);

  PretrainOptions options_;
  std::vector<FeatureSequence> pool_;
  std::vector<FeatureSequence> dev_;
  DecoarModel model_;
  DecoarModel best_model_;
  ParamList params_;
  TrainState state_;
  std::vector<EpochMetrics> curve_;
  std::size_t skipped_short_ = 0;
};

enum class FeatureKind { kFilterbank, kDecoar };

struct FinetuneOptions {
  CtcHeadConfig head;  // input_dim filled in from the feature kind
  NoamSchedule schedule;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct LabeledExample {
  Tensor features;  // T × input_dim, constants
  LabelSequence target;
  std::string utterance_id;
};

// Runs the frozen encoder over every sequence (or passes filterbanks
// through) and pairs the result with its transcript.
std::vector<LabeledExample> prepare_examples(
    const std::vector<FeatureSequence>& seqs,
    const std::vector<LabelSequence>& targets, FeatureKind kind,
    const DecoarModel* encoder);

// CTC finetuning of the head on fixed input features. The encoder never
// appears in the optimized parameter set.
class FinetuneTrainer {
 public:
  FinetuneTrainer(std::vector<LabeledExample> train,
                  std::vector<LabeledExample> dev, FinetuneOptions options);

  bool step_batch();
  bool finished() const;
  void run(std::ostream* metrics_log = nullptr);

  const CtcHead& head() const { return head_; }
  const CtcHead& best_head() const { return best_head_; }
  const std::vector<EpochMetrics>& curve() const { return curve_; }
  const TrainState& state() const { return state_; }

  // Greedy-decode PER over a labeled set.
  double evaluate_per(const std::vector<LabeledExample>& examples) const;

  void save_checkpoint(const std::string& path) const;
  static FinetuneTrainer restore(const std::string& path,
                                 std::vector<LabeledExample> train,
                                 std::vector<LabeledExample> dev,
                                 FinetuneOptions options);

 private:
  void finish_epoch(std::ostream* metrics_log);

  FinetuneOptions options_;
  std::vector<LabeledExample> train_;
  std::vector<LabeledExample> dev_;
  CtcHead head_;
  CtcHead best_head_;
  ParamList params_;
  TrainState state_;
  std::vector<EpochMetrics> curve_;
};

// One-call conveniences.
struct PretrainResult {
  DecoarModel model;       // best by dev loss
  DecoarModel last_model;  // end-of-training parameters
  std::vector<EpochMetrics> curve;
};
PretrainResult train_pretrain(const std::vector<FeatureSequence>& pool,
                              const std::vector<FeatureSequence>& dev,
                              const PretrainOptions& options,
                              std::ostream* metrics_log = nullptr);

struct FinetuneResult {
  CtcHead head;  // best by dev PER
  std::vector<EpochMetrics> curve;
};
FinetuneResult train_finetune(const std::vector<LabeledExample>& train,
                              const std::vector<LabeledExample>& dev,
                              const FinetuneOptions& options,
                              std::ostream* metrics_log = nullptr);

}  // namespace decoar
