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

#include "decoar/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "decoar/checkpoint.hpp"

namespace decoar {

double NoamSchedule::lr_at(std::size_t step) const {
  if (step < 1) {
    throw std::invalid_argument("NoamSchedule: step must be >= 1, got " +
                                std::to_string(step));
  }
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup_steps);
  return base_lr * std::min(s / w, std::sqrt(w / s));
}

double lr_at(const NoamSchedule& schedule, std::size_t step) {
  return schedule.lr_at(step);
}

void sgd_step(const ParamList& params, double lr,
              const std::set<std::string>& frozen) {
  for (const auto& [path, param] : params) {
    if (frozen.contains(path)) continue;
    Tensor p = param;
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    double* v = p.value().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::isnan(g[i])) {
        throw std::runtime_error("sgd_step: NaN gradient in parameter '" +
                                 path + "'");
      }
      v[i] -= lr * g[i];
    }
  }
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [path, param] : params) {
    if (!param.has_grad()) continue;
    for (const double g : Tensor(param).grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& [path, param] : params) {
      Tensor p = param;
      if (!p.has_grad()) continue;
      for (double& g : p.grad_buffer()) g *= scale;
    }
  }
  return norm;
}

void zero_grads(const ParamList& params) {
  for (const auto& [path, param] : params) Tensor(param).zero_grad();
}

BatchPlan BatchPlan::build(const std::vector<std::size_t>& lengths,
                           std::size_t batch_size, std::uint64_t seed,
                           std::size_t epoch) {
  if (batch_size == 0) {
    throw std::invalid_argument("BatchPlan: batch_size must be positive");
  }
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return lengths[a] < lengths[b];
                   });
  BatchPlan plan;
  std::vector<std::size_t> batch;
  std::size_t batch_min = 0;
  for (const std::size_t id : order) {
    const bool too_long = !batch.empty() && lengths[id] > 2 * batch_min;
    if (batch.size() == batch_size || too_long) {
      plan.batches.push_back(batch);
      batch.clear();
    }
    if (batch.empty()) batch_min = lengths[id];
    batch.push_back(id);
  }
  if (!batch.empty()) plan.batches.push_back(batch);

  Rng rng = Rng(seed).substream("batch", epoch);
  rng.shuffle(plan.batches);
  return plan;
}

namespace {

// Per-utterance gradients, merged into the shared parameters in utterance
// order. The merge order is what makes the result identical for any thread
// count: each utterance's gradient is accumulated into a fresh buffer and
// the buffers are summed 0, 1, 2, ... regardless of which worker produced
// them. Workers run on cloned parameter sets.
//
// compute(params_of_replica_or_main, utterance_index) must run forward and
// backward under its own tape, leaving gradients on the given params, and
// return the utterance loss.
template <typename Model>
std::vector<double> batch_gradients(
    Model& model, ParamList& params, const std::vector<std::size_t>& batch,
    std::size_t threads,
    const std::function<double(Model&, std::size_t)>& compute) {
  const std::size_t n = batch.size();
  std::vector<double> losses(n, 0.0);
  if (n == 1) {
    // single-utterance batch: accumulating directly into the main parameters
    // is identical to the slot merge below
    zero_grads(params);
    losses[0] = compute(model, batch[0]);
    return losses;
  }
  std::vector<std::vector<std::vector<double>>> slots(n);

  auto run_one = [&](Model& m, ParamList& ps, std::size_t slot_idx) {
    zero_grads(ps);
    losses[slot_idx] = compute(m, batch[slot_idx]);
    auto& slot = slots[slot_idx];
    slot.resize(ps.size());
    for (std::size_t p = 0; p < ps.size(); ++p) {
      Tensor t = ps[p].second;
      if (t.has_grad()) {
        const auto g = t.grad();
        slot[p].assign(g.begin(), g.end());
      }
    }
  };

  if (threads <= 1) {
    for (std::size_t u = 0; u < n; ++u) run_one(model, params, u);
  } else {
    const std::size_t workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        Model replica = model.clone();
        ParamList rp = replica.named_parameters();
        for (std::size_t u = w; u < n; u += workers) run_one(replica, rp, u);
      });
    }
    for (auto& t : pool) t.join();
  }

  zero_grads(params);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (slots[u].size() <= p || slots[u][p].empty()) continue;
      auto& dst = params[p].second.grad_buffer();
      const auto& src = slots[u][p];
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    }
  }
  return losses;
}

Tensor state_to_tensor(const TrainState& s) {
  return Tensor(Shape{6}, {static_cast<double>(s.epoch),
                           static_cast<double>(s.batch_index),
                           static_cast<double>(s.step), s.epoch_loss_sum,
                           static_cast<double>(s.epoch_loss_terms),
                           s.best_dev});
}

TrainState state_from_tensor(const Tensor& t) {
  const auto v = t.value();
  TrainState s;
  s.epoch = static_cast<std::size_t>(v[0]);
  s.batch_index = static_cast<std::size_t>(v[1]);
  s.step = static_cast<std::size_t>(v[2]);
  s.epoch_loss_sum = v[3];
  s.epoch_loss_terms = static_cast<std::size_t>(v[4]);
  s.best_dev = v[5];
  return s;
}

void write_metrics_line(std::ostream* log, const EpochMetrics& m) {
  if (log == nullptr) return;
  (*log) << m.epoch << '\t' << m.step << '\t' << m.mean_loss << '\t'
         << m.dev_metric << '\t' << m.lr << '\n';
  log->flush();
}

[[noreturn]] void rethrow_with_step(const std::exception& e, std::size_t step,
                                    double batch_loss) {
  throw std::runtime_error(std::string(e.what()) + " (at step " +
                           std::to_string(step + 1) + ", batch loss " +
                           std::to_string(batch_loss) + ")");
}

}  // namespace

// --- pretraining ------------------------------------------------------------

PretrainTrainer::PretrainTrainer(std::vector<FeatureSequence> pool,
                                 std::vector<FeatureSequence> dev,
                                 PretrainOptions options)
    : options_(options) {
  if (pool.empty()) {
    throw std::invalid_argument("pretrain: unlabeled pool is empty");
  }
  for (auto& seq : pool) {
    if (seq.num_frames() > options_.model.k()) {
      pool_.push_back(std::move(seq));
    } else {
      ++skipped_short_;  // shorter than one slice; cannot contribute
    }
  }
  if (pool_.empty()) {
    throw std::invalid_argument(
        "pretrain: every pool sequence is shorter than the slice size");
  }
  for (auto& seq : dev) {
    if (seq.num_frames() > options_.model.k()) dev_.push_back(std::move(seq));
  }
  Rng rng = Rng(options_.seed).substream("init");
  model_ = DecoarModel::init(options_.model, rng);
  best_model_ = model_.clone();
  params_ = model_.named_parameters();
}

bool PretrainTrainer::finished() const {
  return state_.epoch >= options_.epochs;
}

double PretrainTrainer::dev_loss() const {
  if (dev_.empty()) return 0.0;
  NoGradScope ng;
  double total = 0.0;
  for (const auto& seq : dev_) {
    total += utterance_loss(model_, seq.frames).scalar_value();
  }
  return total / static_cast<double>(dev_.size());
}

bool PretrainTrainer::step_batch() {
  if (finished()) return false;
  const BatchPlan plan = BatchPlan::build(
      [&] {
        std::vector<std::size_t> lengths;
        lengths.reserve(pool_.size());
        for (const auto& s : pool_) lengths.push_back(s.num_frames());
        return lengths;
      }(),
      options_.batch_size, options_.seed, state_.epoch);

  const auto& batch = plan.batches[state_.batch_index];
  const std::function<double(DecoarModel&, std::size_t)> compute =
      [&](DecoarModel& m, std::size_t utt) {
        Tape tape;
        TapeScope scope(tape);
        const Tensor loss = utterance_loss(m, pool_[utt].frames);
        tape.backward(loss);
        return loss.scalar_value();
      };
  const auto losses =
      batch_gradients(model_, params_, batch, options_.threads, compute);
  const double batch_loss = std::accumulate(losses.begin(), losses.end(), 0.0);
  state_.epoch_loss_sum += batch_loss;
  state_.epoch_loss_terms += batch.size();

  clip_grad_norm(params_, options_.clip_norm);
  const double lr = options_.schedule.lr_at(state_.step + 1);
  try {
    sgd_step(params_, lr);
  } catch (const std::exception& e) {
    rethrow_with_step(e, state_.step, batch_loss);
  }
  zero_grads(params_);
  ++state_.step;
  ++state_.batch_index;

  if (state_.batch_index >= plan.batches.size()) finish_epoch(nullptr);
  return !finished();
}

void PretrainTrainer::finish_epoch(std::ostream* metrics_log) {
  EpochMetrics m;
  m.epoch = state_.epoch + 1;
  m.step = state_.step;
  m.mean_loss = state_.epoch_loss_sum /
                static_cast<double>(std::max<std::size_t>(1, state_.epoch_loss_terms));
  m.dev_metric = dev_loss();
  m.lr = options_.schedule.lr_at(std::max<std::size_t>(1, state_.step));
  curve_.push_back(m);
  write_metrics_line(metrics_log, m);
  if (m.dev_metric < state_.best_dev || curve_.size() == 1) {
    state_.best_dev = m.dev_metric;
    best_model_ = model_.clone();
  }
  ++state_.epoch;
  state_.batch_index = 0;
  state_.epoch_loss_sum = 0.0;
  state_.epoch_loss_terms = 0;
}

void PretrainTrainer::run(std::ostream* metrics_log) {
  while (!finished()) {
    const std::size_t before = curve_.size();
    step_batch();
    if (metrics_log != nullptr && curve_.size() > before) {
      write_metrics_line(metrics_log, curve_.back());
    }
  }
}

void PretrainTrainer::save_checkpoint(const std::string& path) const {
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.emplace_back("trainer.state", state_to_tensor(state_));
  for (const auto& [name, t] : params_) entries.emplace_back("current." + name, t);
  for (const auto& [name, t] : best_model_.named_parameters()) {
    entries.emplace_back("best." + name, t);
  }
  decoar::save_checkpoint(path, entries);
}

PretrainTrainer PretrainTrainer::restore(const std::string& path,
                                         std::vector<FeatureSequence> pool,
                                         std::vector<FeatureSequence> dev,
                                         PretrainOptions options) {
  PretrainTrainer trainer(std::move(pool), std::move(dev), options);
  const auto entries = load_checkpoint_map(path);
  const auto it = entries.find("trainer.state");
  if (it == entries.end()) {
    throw std::runtime_error("checkpoint '" + path + "': missing trainer.state");
  }
  trainer.state_ = state_from_tensor(it->second);
  for (auto& [name, param] : trainer.params_) {
    const auto pit = entries.find("current." + name);
    if (pit == entries.end()) {
      throw std::runtime_error("checkpoint '" + path + "': missing parameter " + name);
    }
    param.copy_value_from(pit->second);
  }
  for (auto& [name, param] : trainer.best_model_.named_parameters()) {
    const auto pit = entries.find("best." + name);
    if (pit != entries.end()) param.copy_value_from(pit->second);
  }
  return trainer;
}

// --- finetuning ---------------------------------------------------------

std::vector<LabeledExample> prepare_examples(
    const std::vector<FeatureSequence>& seqs,
    const std::vector<LabelSequence>& targets, FeatureKind kind,
    const DecoarModel* encoder) {
  if (seqs.size() != targets.size()) {
    throw std::invalid_argument("prepare_examples: " + std::to_string(seqs.size()) +
                                " sequences vs " + std::to_string(targets.size()) +
                                " targets");
  }
  if (kind == FeatureKind::kDecoar && encoder == nullptr) {
    throw std::invalid_argument("prepare_examples: decoar features need an encoder");
  }
  std::vector<LabeledExample> out;
  out.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    LabeledExample e;
    e.utterance_id = seqs[i].utterance_id;
    e.target = targets[i];
    e.features = kind == FeatureKind::kDecoar
                     ? extract_decoar_features(*encoder, seqs[i].frames)
                     : seqs[i].frames;
    out.push_back(std::move(e));
  }
  return out;
}

FinetuneTrainer::FinetuneTrainer(std::vector<LabeledExample> train,
                                 std::vector<LabeledExample> dev,
                                 FinetuneOptions options)
    : options_(options), train_(std::move(train)), dev_(std::move(dev)) {
  if (train_.empty()) {
    throw std::invalid_argument("finetune: labeled training set is empty");
  }
  for (const auto& e : train_) {
    if (e.target.empty()) {
      throw std::invalid_argument("finetune: utterance '" + e.utterance_id +
                                  "' has an empty transcript");
    }
  }
  Rng rng = Rng(options_.seed).substream("init");
  head_ = CtcHead::init(options_.head, rng);
  best_head_ = head_.clone();
  params_ = head_.named_parameters();
}

bool FinetuneTrainer::finished() const { return state_.epoch >= options_.epochs; }

double FinetuneTrainer::evaluate_per(
    const std::vector<LabeledExample>& examples) const {
  NoGradScope ng;
  std::size_t dist = 0, ref_len = 0;
  for (const auto& e : examples) {
    const Tensor lp = log_softmax_rows(head_.logits(e.features));
    const LabelSequence hyp = greedy_decode(lp);
    dist += edit_distance(e.target, hyp).distance;
    ref_len += e.target.size();
  }
  if (ref_len == 0) return 0.0;
  return static_cast<double>(dist) / static_cast<double>(ref_len);
}

bool FinetuneTrainer::step_batch() {
  if (finished()) return false;
  const BatchPlan plan = BatchPlan::build(
      [&] {
        std::vector<std::size_t> lengths;
        lengths.reserve(train_.size());
        for (const auto& e : train_) lengths.push_back(e.features.rows());
        return lengths;
      }(),
      options_.batch_size, options_.seed, state_.epoch);

  const auto& batch = plan.batches[state_.batch_index];
  const std::function<double(CtcHead&, std::size_t)> compute =
      [&](CtcHead& h, std::size_t utt) {
        Tape tape;
        TapeScope scope(tape);
        const Tensor loss =
            ctc_loss_node(h.logits(train_[utt].features), train_[utt].target);
        tape.backward(loss);
        return loss.scalar_value();
      };
  const auto losses =
      batch_gradients(head_, params_, batch, options_.threads, compute);
  const double batch_loss = std::accumulate(losses.begin(), losses.end(), 0.0);
  state_.epoch_loss_sum += batch_loss;
  state_.epoch_loss_terms += batch.size();

  clip_grad_norm(params_, options_.clip_norm);
  const double lr = options_.schedule.lr_at(state_.step + 1);
  try {
    sgd_step(params_, lr);
  } catch (const std::exception& e) {
    rethrow_with_step(e, state_.step, batch_loss);
  }
  zero_grads(params_);
  ++state_.step;
  ++state_.batch_index;

  if (state_.batch_index >= plan.batches.size()) finish_epoch(nullptr);
  return !finished();
}

void FinetuneTrainer::finish_epoch(std::ostream* metrics_log) {
  EpochMetrics m;
  m.epoch = state_.epoch + 1;
  m.step = state_.step;
  m.mean_loss = state_.epoch_loss_sum /
                static_cast<double>(std::max<std::size_t>(1, state_.epoch_loss_terms));
  m.dev_metric = dev_.empty() ? 0.0 : evaluate_per(dev_);
  m.lr = options_.schedule.lr_at(std::max<std::size_t>(1, state_.step));
  curve_.push_back(m);
  write_metrics_line(metrics_log, m);
  if (m.dev_metric < state_.best_dev || curve_.size() == 1) {
    state_.best_dev = m.dev_metric;
    best_head_ = head_.clone();
  }
  ++state_.epoch;
  state_.batch_index = 0;
  state_.epoch_loss_sum = 0.0;
  state_.epoch_loss_terms = 0;
}

void FinetuneTrainer::run(std::ostream* metrics_log) {
  while (!finished()) {
    const std::size_t before = curve_.size();
    step_batch();
    if (metrics_log != nullptr && curve_.size() > before) {
      write_metrics_line(metrics_log, curve_.back());
    }
  }
}

void FinetuneTrainer::save_checkpoint(const std::string& path) const {
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.emplace_back("trainer.state", state_to_tensor(state_));
  for (const auto& [name, t] : params_) entries.emplace_back("current." + name, t);
  for (const auto& [name, t] : best_head_.named_parameters()) {
    entries.emplace_back("best." + name, t);
  }
  decoar::save_checkpoint(path, entries);
}

FinetuneTrainer FinetuneTrainer::restore(const std::string& path,
                                         std::vector<LabeledExample> train,
                                         std::vector<LabeledExample> dev,
                                         FinetuneOptions options) {
  FinetuneTrainer trainer(std::move(train), std::move(dev), options);
  const auto entries = load_checkpoint_map(path);
  const auto it = entries.find("trainer.state");
  if (it == entries.end()) {
    throw std::runtime_error("checkpoint '" + path + "': missing trainer.state");
  }
  trainer.state_ = state_from_tensor(it->second);
  for (auto& [name, param] : trainer.params_) {
    const auto pit = entries.find("current." + name);
    if (pit == entries.end()) {
      throw std::runtime_error("checkpoint '" + path + "': missing parameter " + name);
    }
    param.copy_value_from(pit->second);
  }
  for (auto& [name, param] : trainer.best_head_.named_parameters()) {
    const auto pit = entries.find("best." + name);
    if (pit != entries.end()) param.copy_value_from(pit->second);
  }
  return trainer;
}

PretrainResult train_pretrain(const std::vector<FeatureSequence>& pool,
                              const std::vector<FeatureSequence>& dev,
                              const PretrainOptions& options,
                              std::ostream* metrics_log) {
  PretrainTrainer trainer(pool, dev, options);
  trainer.run(metrics_log);
  return PretrainResult{trainer.best_model().clone(), trainer.model().clone(),
                        trainer.curve()};
}

FinetuneResult train_finetune(const std::vector<LabeledExample>& train,
                              const std::vector<LabeledExample>& dev,
                              const FinetuneOptions& options,
                              std::ostream* metrics_log) {
  FinetuneTrainer trainer(train, dev, options);
  trainer.run(metrics_log);
  return FinetuneResult{trainer.best_head().clone(), trainer.curve()};
}

}  // namespace decoar
