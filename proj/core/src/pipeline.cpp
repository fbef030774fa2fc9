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

#include "decoar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "decoar/features.hpp"
#include "decoar/wav.hpp"

namespace fs = std::filesystem;

namespace decoar {

namespace {

std::size_t resolve_threads(std::size_t configured) {
  if (configured != 0) return configured;
  const unsigned hw = std::thread::hardware_concurrency();
  return std::min<std::size_t>(4, hw == 0 ? 1 : hw);
}

std::vector<const std::vector<Utterance>*> all_splits(const CorpusManifest& m) {
  return {&m.unlabeled_pool, &m.labeled_train, &m.dev, &m.test};
}

std::string feature_path(const std::string& features_dir,
                         const std::string& uid) {
  return (fs::path(features_dir) / (uid + ".feat")).string();
}

void write_resolved_config(const RunConfig& config, const ExperimentSpec& spec,
                           std::uint64_t seed) {
  RunConfig snapshot = config;
  snapshot.set("run.manifest", spec.manifest_path);
  snapshot.set("run.features_dir", spec.features_dir);
  snapshot.set("run.seed", std::to_string(seed));
  snapshot.save((fs::path(spec.out_dir) / "config.resolved").string());
}

const std::vector<Utterance>& pick_split(const CorpusManifest& manifest,
                                         const std::string& name) {
  if (name == "dev") return manifest.dev;
  if (name == "test") return manifest.test;
  if (name == "labeled_train") return manifest.labeled_train;
  throw std::invalid_argument("unknown split '" + name + "' (want dev, test, or labeled_train)");
}

std::uint64_t single_seed(const ExperimentSpec& spec) {
  if (spec.seeds.size() != 1) {
    throw std::invalid_argument("this command takes exactly one seed, got " +
                                std::to_string(spec.seeds.size()));
  }
  return spec.seeds[0];
}

struct EvalTotals {
  std::size_t distance = 0, subs = 0, ins = 0, dels = 0, ref_len = 0;
  double per() const {
    return ref_len == 0 ? 0.0
                        : static_cast<double>(distance) / static_cast<double>(ref_len);
  }
};

// Decodes every example and writes per-utterance rows + hypotheses.
EvalTotals evaluate_split(const CtcHead& head,
                          const std::vector<LabeledExample>& examples,
                          const LabelVocabulary& vocab,
                          const std::string& decoder, std::size_t beam_width,
                          std::ostream* per_utt, std::ostream* hyp_out) {
  NoGradScope ng;
  EvalTotals totals;
  for (const auto& e : examples) {
    const Tensor lp = log_softmax_rows(head.logits(e.features));
    const LabelSequence hyp = decoder == "beam"
                                  ? prefix_beam_decode(lp, beam_width)
                                  : greedy_decode(lp);
    const EditCounts counts = edit_distance(e.target, hyp);
    totals.distance += counts.distance;
    totals.subs += counts.substitutions;
    totals.ins += counts.insertions;
    totals.dels += counts.deletions;
    totals.ref_len += e.target.size();
    if (per_utt != nullptr) {
      (*per_utt) << e.utterance_id << '\t' << e.target.size() << '\t'
                 << counts.distance << '\t' << counts.substitutions << '\t'
                 << counts.insertions << '\t' << counts.deletions << '\t'
                 << error_rate(counts, e.target.size()) << '\n';
    }
    if (hyp_out != nullptr) {
      (*hyp_out) << e.utterance_id << '\t';
      for (std::size_t i = 0; i < hyp.size(); ++i) {
        if (i) (*hyp_out) << ' ';
        (*hyp_out) << vocab.symbols[hyp[i]];
      }
      (*hyp_out) << '\n';
    }
  }
  return totals;
}

std::vector<LabeledExample> make_examples(const CorpusManifest& manifest,
                                          const std::vector<Utterance>& split,
                                          const std::string& features_dir,
                                          FeatureKind kind,
                                          const DecoarModel* encoder) {
  const auto features = load_split_features(split, features_dir);
  const auto targets = split_targets(split);
  return prepare_examples(features, targets, kind, encoder);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
  RunConfig config;
  if (path.empty()) return config;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config '" + path + "': cannot open");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config '" + path + "' line " +
                               std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t");
      const std::size_t e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    config.values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return config;
}

std::string RunConfig::get(const std::string& key,
                           const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : std::stod(it->second);
}

std::size_t RunConfig::get_size(const std::string& key,
                                std::size_t fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback
                            : static_cast<std::size_t>(std::stoull(it->second));
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  return it->second == "true" || it->second == "1" || it->second == "yes";
}

void RunConfig::set(const std::string& key, const std::string& value) {
  values[key] = value;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("config '" + path + "': cannot open for writing");
  for (const auto& [k, v] : values) os << k << "=" << v << "\n";
}

DecoarConfig decoar_config_from(const RunConfig& config) {
  DecoarConfig c;
  c.slice_size = config.get_size("model.slice_size", 18);
  c.feature_dim = config.get_size("model.feature_dim", 40);
  c.encoder_layers = config.get_size("model.layers", 2);
  c.encoder_hidden = config.get_size("model.hidden", 64);
  c.ffn_hidden = config.get_size("model.ffn_hidden", 512);
  c.bidirectional = config.get_bool("model.bidirectional", true);
  return c;
}

PretrainOptions pretrain_options_from(const RunConfig& config,
                                      std::uint64_t seed) {
  PretrainOptions o;
  o.model = decoar_config_from(config);
  o.schedule.base_lr = config.get_double("pretrain.base_lr", 0.001);
  o.schedule.warmup_steps = config.get_size("pretrain.warmup", 500);
  o.epochs = config.get_size("pretrain.epochs", 20);
  o.batch_size = config.get_size("pretrain.batch_size", 8);
  o.clip_norm = config.get_double("pretrain.clip_norm", 5.0);
  o.seed = seed;
  o.threads = resolve_threads(config.get_size("train.threads", 0));
  return o;
}

FinetuneOptions finetune_options_from(const RunConfig& config,
                                      std::uint64_t seed,
                                      std::size_t input_dim,
                                      std::size_t num_classes) {
  FinetuneOptions o;
  o.head.input_dim = input_dim;
  o.head.proj_dim = config.get_size("head.proj_dim", 64);
  o.head.hidden = config.get_size("head.hidden", 64);
  o.head.layers = config.get_size("head.layers", 2);
  o.head.num_classes = num_classes;
  o.schedule.base_lr = config.get_double("finetune.base_lr", 0.001);
  o.schedule.warmup_steps = config.get_size("finetune.warmup", 500);
  o.epochs = config.get_size("finetune.epochs", 20);
  o.batch_size = config.get_size("finetune.batch_size", 8);
  o.clip_norm = config.get_double("finetune.clip_norm", 5.0);
  o.seed = seed;
  o.threads = resolve_threads(config.get_size("train.threads", 0));
  return o;
}

std::vector<FeatureSequence> load_split_features(
    const std::vector<Utterance>& split, const std::string& features_dir) {
  std::vector<FeatureSequence> out;
  out.reserve(split.size());
  for (const auto& u : split) {
    out.push_back(load_feature_sequence(feature_path(features_dir, u.utterance_id)));
  }
  return out;
}

std::vector<LabelSequence> split_targets(const std::vector<Utterance>& split) {
  std::vector<LabelSequence> out;
  out.reserve(split.size());
  for (const auto& u : split) {
    if (!u.transcript.has_value()) {
      throw std::runtime_error("utterance '" + u.utterance_id +
                               "' has no transcript");
    }
    out.push_back(*u.transcript);
  }
  return out;
}

int cmd_features(const std::string& manifest_path, const std::string& out_dir) {
  const CorpusManifest manifest = CorpusManifest::load(manifest_path);
  fs::create_directories(out_dir);

  std::vector<FeatureSequence> raw;
  std::vector<std::pair<std::string, std::string>> errors;
  for (const auto* split : all_splits(manifest)) {
    for (const auto& u : *split) {
      try {
        const WavData wav = read_wav(manifest.resolve(u.wav_path));
        AudioBuffer audio{wav.samples, wav.sample_rate, u.utterance_id,
                          u.speaker_id};
        raw.push_back(compute_logmel(audio));
      } catch (const std::exception& e) {
        errors.emplace_back(u.utterance_id, e.what());
      }
    }
  }

  if (!raw.empty()) {
    const auto stats = accumulate_speaker_stats(raw);
    for (const auto& seq : raw) {
      const FeatureSequence normalized =
          apply_cmvn(seq, stats.at(seq.speaker_id));
      save_feature_sequence(feature_path(out_dir, seq.utterance_id), normalized);
    }
    save_speaker_stats((fs::path(out_dir) / "speaker_stats.bin").string(), stats);
  }

  if (!errors.empty()) {
    std::ofstream report((fs::path(out_dir) / "errors.txt").string(),
                         std::ios::trunc);
    for (const auto& [uid, what] : errors) {
      report << uid << '\t' << what << '\n';
      std::cerr << "features: " << uid << ": " << what << "\n";
    }
    std::cerr << "features: " << errors.size() << " utterance(s) failed\n";
    return 1;
  }
  std::cout << "features: wrote " << raw.size() << " utterances to " << out_dir
            << "\n";
  return 0;
}

int cmd_pretrain(const ExperimentSpec& spec) {
  const std::uint64_t seed = single_seed(spec);
  const RunConfig config = RunConfig::load(spec.config_path);
  const CorpusManifest manifest = CorpusManifest::load(spec.manifest_path);
  fs::create_directories(spec.out_dir);
  write_resolved_config(config, spec, seed);

  const auto pool = load_split_features(manifest.unlabeled_pool, spec.features_dir);
  const auto dev = load_split_features(manifest.dev, spec.features_dir);
  const PretrainOptions options = pretrain_options_from(config, seed);

  std::ofstream metrics((fs::path(spec.out_dir) / "metrics.tsv").string(),
                        std::ios::trunc);
  metrics << "epoch\tstep\tmean_loss\tdev_loss\tlr\n";
  PretrainTrainer trainer(pool, dev, options);
  trainer.run(&metrics);
  if (trainer.skipped_short() > 0) {
    std::cout << "pretrain: skipped " << trainer.skipped_short()
              << " sequence(s) shorter than the slice\n";
  }

  trainer.best_model().save((fs::path(spec.out_dir) / "decoar.ckpt").string());
  trainer.model().save((fs::path(spec.out_dir) / "decoar_last.ckpt").string());
  std::cout << "pretrain: " << trainer.curve().size() << " epochs, best dev loss "
            << trainer.state().best_dev << "\n";
  return 0;
}

int cmd_finetune(const ExperimentSpec& spec, FeatureKind kind,
                 const std::string& encoder_ckpt) {
  const std::uint64_t seed = single_seed(spec);
  const RunConfig config = RunConfig::load(spec.config_path);
  CorpusManifest manifest = CorpusManifest::load(spec.manifest_path);
  fs::create_directories(spec.out_dir);
  write_resolved_config(config, spec, seed);

  const double fraction = config.get_double("finetune.labeled_fraction", 1.0);
  if (fraction < 1.0) {
    // the subset is keyed on the corpus, not the training seed, so different
    // training seeds see identical data
    manifest = split_labeled_fraction(manifest, fraction,
                                      config.get_size("finetune.subset_seed", 1));
  }

  DecoarModel encoder;
  const DecoarModel* encoder_ptr = nullptr;
  std::size_t input_dim = decoar_config_from(config).feature_dim;
  if (kind == FeatureKind::kDecoar) {
    if (encoder_ckpt.empty()) {
      std::cerr << "finetune: decoar features require --encoder\n";
      return 2;
    }
    encoder = DecoarModel::load(encoder_ckpt);
    encoder_ptr = &encoder;
    input_dim = encoder.config.context_dim();
  }

  const auto train = make_examples(manifest, manifest.labeled_train,
                                   spec.features_dir, kind, encoder_ptr);
  const auto dev = make_examples(manifest, manifest.dev, spec.features_dir,
                                 kind, encoder_ptr);
  const auto test = make_examples(manifest, manifest.test, spec.features_dir,
                                  kind, encoder_ptr);

  const FinetuneOptions options = finetune_options_from(
      config, seed, input_dim, manifest.vocabulary.num_classes());

  std::ofstream metrics((fs::path(spec.out_dir) / "metrics.tsv").string(),
                        std::ios::trunc);
  metrics << "epoch\tstep\tmean_loss\tdev_per\tlr\n";
  FinetuneTrainer trainer(train, dev, options);
  trainer.run(&metrics);

  const CtcHead& best = trainer.best_head();
  best.save((fs::path(spec.out_dir) / "head.ckpt").string());

  NoGradScope ng;
  EvalTotals dev_totals, test_totals;
  {
    std::size_t dist = 0, ref = 0;
    for (const auto& e : dev) {
      const auto lp = log_softmax_rows(best.logits(e.features));
      dist += edit_distance(e.target, greedy_decode(lp)).distance;
      ref += e.target.size();
    }
    dev_totals.distance = dist;
    dev_totals.ref_len = ref;
  }
  {
    std::size_t dist = 0, ref = 0;
    for (const auto& e : test) {
      const auto lp = log_softmax_rows(best.logits(e.features));
      dist += edit_distance(e.target, greedy_decode(lp)).distance;
      ref += e.target.size();
    }
    test_totals.distance = dist;
    test_totals.ref_len = ref;
  }

  std::ofstream summary((fs::path(spec.out_dir) / "summary.tsv").string(),
                        std::ios::trunc);
  summary << "features\tlabeled_fraction\tdev_per\ttest_per\n";
  summary << (kind == FeatureKind::kDecoar ? "decoar" : "fbank") << '\t'
          << fraction << '\t' << dev_totals.per() << '\t' << test_totals.per()
          << '\n';
  std::cout << "finetune(" << (kind == FeatureKind::kDecoar ? "decoar" : "fbank")
            << "): dev PER " << dev_totals.per() << ", test PER "
            << test_totals.per() << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentSpec& spec, const std::string& head_ckpt,
                 FeatureKind kind, const std::string& encoder_ckpt,
                 const std::string& split, const std::string& decoder,
                 std::size_t beam_width) {
  const CorpusManifest manifest = CorpusManifest::load(spec.manifest_path);
  fs::create_directories(spec.out_dir);
  if (decoder != "greedy" && decoder != "beam") {
    std::cerr << "evaluate: unknown decoder '" << decoder << "'\n";
    return 2;
  }

  DecoarModel encoder;
  const DecoarModel* encoder_ptr = nullptr;
  if (kind == FeatureKind::kDecoar) {
    if (encoder_ckpt.empty()) {
      std::cerr << "evaluate: decoar features require --encoder\n";
      return 2;
    }
    encoder = DecoarModel::load(encoder_ckpt);
    encoder_ptr = &encoder;
  }
  const CtcHead head = CtcHead::load(head_ckpt);
  const auto examples = make_examples(manifest, pick_split(manifest, split),
                                      spec.features_dir, kind, encoder_ptr);

  std::ofstream per_utt((fs::path(spec.out_dir) / ("eval_" + split + ".tsv")).string(),
                        std::ios::trunc);
  per_utt << "utterance_id\tref_len\tdistance\tsub\tins\tdel\tper\n";
  std::ofstream hyps((fs::path(spec.out_dir) / ("hyp_" + split + ".tsv")).string(),
                     std::ios::trunc);
  const EvalTotals totals = evaluate_split(head, examples, manifest.vocabulary,
                                           decoder, beam_width, &per_utt, &hyps);
  per_utt << "TOTAL\t" << totals.ref_len << '\t' << totals.distance << '\t'
          << totals.subs << '\t' << totals.ins << '\t' << totals.dels << '\t'
          << totals.per() << '\n';
  std::cout << "evaluate: " << split << " PER " << totals.per() << " (S="
            << totals.subs << " I=" << totals.ins << " D=" << totals.dels
            << ", N=" << totals.ref_len << ")\n";
  return 0;
}

int cmd_ablate(const ExperimentSpec& spec, const std::string& axis) {
  const RunConfig base_config = RunConfig::load(spec.config_path);
  const CorpusManifest manifest = CorpusManifest::load(spec.manifest_path);
  fs::create_directories(spec.out_dir);

  struct GridPoint {
    std::string label;
    std::size_t slice_size;
    bool bidirectional;
  };
  std::vector<GridPoint> grid;
  if (axis == "slice_size") {
    for (const std::size_t s : {12, 18, 22}) {
      grid.push_back({"slice=" + std::to_string(s), s,
                      base_config.get_bool("model.bidirectional", true)});
    }
  } else if (axis == "directionality") {
    const std::size_t s = base_config.get_size("model.slice_size", 18);
    grid.push_back({"unidirectional", s, false});
    grid.push_back({"bidirectional", s, true});
  } else {
    std::cerr << "ablate: unknown axis '" << axis
              << "' (want slice_size or directionality)\n";
    return 2;
  }

  const double fraction = base_config.get_double("finetune.labeled_fraction", 1.0);
  const CorpusManifest run_manifest =
      fraction < 1.0 ? split_labeled_fraction(
                           manifest, fraction,
                           base_config.get_size("finetune.subset_seed", 1))
                     : manifest;

  const auto pool = load_split_features(run_manifest.unlabeled_pool, spec.features_dir);
  const auto dev_feats = load_split_features(run_manifest.dev, spec.features_dir);

  std::ofstream table((fs::path(spec.out_dir) / ("ablation_" + axis + ".tsv")).string(),
                      std::ios::trunc);
  table << "config\tdev_per\ttest_per\n";

  for (const auto& point : grid) {
    std::vector<double> dev_pers, test_pers;
    for (const std::uint64_t seed : spec.seeds) {
      RunConfig config = base_config;
      config.set("model.slice_size", std::to_string(point.slice_size));
      config.set("model.bidirectional", point.bidirectional ? "true" : "false");

      const PretrainOptions popts = pretrain_options_from(config, seed);
      PretrainTrainer pretrainer(pool, dev_feats, popts);
      pretrainer.run(nullptr);
      const DecoarModel& encoder = pretrainer.best_model();

      const auto train = make_examples(run_manifest, run_manifest.labeled_train,
                                       spec.features_dir, FeatureKind::kDecoar,
                                       &encoder);
      const auto dev = make_examples(run_manifest, run_manifest.dev,
                                     spec.features_dir, FeatureKind::kDecoar,
                                     &encoder);
      const auto test = make_examples(run_manifest, run_manifest.test,
                                      spec.features_dir, FeatureKind::kDecoar,
                                      &encoder);
      const FinetuneOptions fopts = finetune_options_from(
          config, seed, encoder.config.context_dim(),
          run_manifest.vocabulary.num_classes());
      FinetuneTrainer finetuner(train, dev, fopts);
      finetuner.run(nullptr);

      NoGradScope ng;
      const CtcHead& head = finetuner.best_head();
      auto per_of = [&](const std::vector<LabeledExample>& ex) {
        std::size_t dist = 0, ref = 0;
        for (const auto& e : ex) {
          const auto lp = log_softmax_rows(head.logits(e.features));
          dist += edit_distance(e.target, greedy_decode(lp)).distance;
          ref += e.target.size();
        }
        return ref == 0 ? 0.0 : static_cast<double>(dist) / static_cast<double>(ref);
      };
      dev_pers.push_back(per_of(dev));
      test_pers.push_back(per_of(test));
      std::cout << "ablate " << point.label << " seed " << seed << ": dev "
                << dev_pers.back() << ", test " << test_pers.back() << "\n";
    }
    table << point.label << '\t' << mean(dev_pers) << '\t' << mean(test_pers)
          << '\n';
  }
  std::cout << "ablate: wrote ablation_" << axis << ".tsv\n";
  return 0;
}

int cmd_reconstruct(const ExperimentSpec& spec,
                    const std::string& encoder_ckpt,
                    const std::string& utterance_id,
                    const std::vector<std::size_t>& offsets) {
  const CorpusManifest manifest = CorpusManifest::load(spec.manifest_path);
  fs::create_directories(spec.out_dir);

  const Utterance* found = nullptr;
  for (const auto* split : all_splits(manifest)) {
    for (const auto& u : *split) {
      if (u.utterance_id == utterance_id) found = &u;
    }
  }
  if (found == nullptr) {
    std::cerr << "reconstruct: unknown utterance '" << utterance_id << "'\n";
    return 2;
  }

  const DecoarModel model = DecoarModel::load(encoder_ckpt);
  const FeatureSequence seq =
      load_feature_sequence(feature_path(spec.features_dir, utterance_id));
  const std::size_t k = model.config.k();
  if (seq.num_frames() <= k) {
    std::cerr << "reconstruct: utterance has " << seq.num_frames()
              << " frames, need more than " << k << "\n";
    return 2;
  }

  auto dump_text = [](const std::string& path, const Tensor& m) {
    std::ofstream os(path, std::ios::trunc);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        if (j) os << ' ';
        os << m(i, j);
      }
      os << '\n';
    }
  };

  // ground truth rows aligned with slice positions
  const std::size_t positions = seq.num_frames() - k;
  dump_text((fs::path(spec.out_dir) / (utterance_id + ".truth.txt")).string(),
            seq.frames);
  FeatureSequence truth = seq;
  save_feature_sequence(
      (fs::path(spec.out_dir) / (utterance_id + ".truth.feat")).string(), truth);

  std::ofstream summary(
      (fs::path(spec.out_dir) / "reconstruction_summary.tsv").string(),
      std::ios::trunc);
  summary << "offset\tmean_l1\n";
  for (const std::size_t offset : offsets) {
    const Tensor recon = reconstruct_spectrogram(model, seq.frames, offset);
    double l1 = 0.0;
    for (std::size_t t = 0; t < positions; ++t) {
      for (std::size_t j = 0; j < seq.dim(); ++j) {
        l1 += std::abs(seq.frames(t + offset, j) - recon(t, j));
      }
    }
    const double mean_l1 =
        l1 / (static_cast<double>(positions) * static_cast<double>(seq.dim()));
    summary << offset << '\t' << mean_l1 << '\n';

    const std::string stem = utterance_id + ".offset" + std::to_string(offset);
    dump_text((fs::path(spec.out_dir) / (stem + ".txt")).string(), recon);
    FeatureSequence rec_seq;
    rec_seq.frames = recon;
    rec_seq.utterance_id = stem;
    rec_seq.speaker_id = seq.speaker_id;
    rec_seq.normalized = seq.normalized;
    save_feature_sequence((fs::path(spec.out_dir) / (stem + ".feat")).string(),
                          rec_seq);
    std::cout << "reconstruct: offset " << offset << " mean L1 " << mean_l1
              << "\n";
  }
  return 0;
}

}  // namespace decoar
