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

#include "decoar/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "decoar/wav.hpp"

namespace fs = std::filesystem;

namespace decoar {

namespace {

// Per-symbol spectral identity: two "formant" bumps on a coarse grid with a
// per-symbol linear glide over the segment, alternating harmonic/sparse-tone
// excitation. Glides make consecutive frames differ in a way that is
// predictable from context but not by copying the previous frame.
struct SymbolSpec {
  bool harmonic = true;
  double f1 = 0.0, f2 = 0.0;
  double bw1 = 0.0, bw2 = 0.0;
  double glide1 = 0.0, glide2 = 0.0;  // relative start->end formant slide
  double am_rate = 16.0;              // amplitude-modulation rate, Hz
  double am_depth = 0.5;              // log-amplitude modulation depth
};

struct SpeakerSpec {
  double tilt = 0.0;     // exponent of (f/1000)^tilt
  double f0 = 120.0;     // base pitch, Hz
  double vtl = 1.0;      // vocal-tract-length factor scaling all formants
};

// Envelope at relative segment position tau in [0, 1].
double envelope(const SymbolSpec& s, double f, double tau) {
  const double c1 = s.f1 * (1.0 + s.glide1 * (tau - 0.5));
  const double c2 = s.f2 * (1.0 + s.glide2 * (tau - 0.5));
  const double d1 = (f - c1) / s.bw1;
  const double d2 = (f - c2) / s.bw2;
  return std::exp(-d1 * d1) + 0.7 * std::exp(-d2 * d2) + 0.01;
}

double tilt_gain(const SpeakerSpec& s, double f) {
  return std::pow(std::max(f, 50.0) / 1000.0, s.tilt);
}

std::vector<SymbolSpec> make_symbol_specs(std::size_t vocab_size, Rng rng) {
  static constexpr double kF1Grid[4] = {350.0, 700.0, 1200.0, 1900.0};
  static constexpr double kF2Grid[4] = {2400.0, 3100.0, 4000.0, 5200.0};
  std::vector<SymbolSpec> specs(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    SymbolSpec& s = specs[i];
    s.harmonic = true;  // dense, stable envelope sampling for every symbol
    s.f1 = kF1Grid[i % 4] * (1.0 + 0.06 * rng.uniform(-1.0, 1.0));
    s.f2 = kF2Grid[(i / 4) % 4] * (1.0 + 0.04 * rng.uniform(-1.0, 1.0));
    s.bw1 = 90.0 + 0.08 * s.f1;
    s.bw2 = 140.0 + 0.08 * s.f2;
    const double dir = (i % 3 == 0) ? 1.0 : (i % 3 == 1 ? -1.0 : 0.6);
    s.glide1 = dir * rng.uniform(0.18, 0.32);
    s.glide2 = -dir * rng.uniform(0.10, 0.22);
    s.am_rate = rng.uniform(13.0, 23.0);
    s.am_depth = rng.uniform(0.45, 0.7);
  }
  return specs;
}

std::vector<SpeakerSpec> make_speaker_specs(std::size_t n, double vtl_min,
                                             double vtl_max, Rng rng) {
  std::vector<SpeakerSpec> specs(n);
  for (auto& s : specs) {
    s.tilt = rng.uniform(-0.5, 0.5);
    s.f0 = rng.uniform(95.0, 220.0);
    s.vtl = rng.uniform(vtl_min, vtl_max);
  }
  return specs;
}

// Sum-of-cosines synthesis with per-component amplitude trajectories that
// follow the symbol's formant glide, and a short raised-cosine fade at both
// ends.
std::vector<double> synth_segment(const SymbolSpec& sym,
                                  const SpeakerSpec& spk, double sample_rate,
                                  std::size_t n_samples, Rng& rng) {
  const double nyquist = sample_rate / 2.0;
  std::vector<double> freqs;
  if (sym.harmonic) {
    const double f0 = spk.f0 * (1.0 + 0.06 * rng.uniform(-1.0, 1.0));
    for (double f = f0; f < nyquist - 200.0; f += f0) freqs.push_back(f);
  } else {
    // sparse fixed tones: at most ~one per mel band, so frames stay clean
    for (int c = 0; c < 14; ++c) {
      freqs.push_back(rng.uniform(150.0, nyquist - 200.0));
    }
  }
  // amplitudes at segment start and end; linear interpolation in between
  std::vector<double> amp0(freqs.size()), amp1(freqs.size()), phases(freqs.size());
  for (std::size_t c = 0; c < freqs.size(); ++c) {
    // the speaker's vocal-tract factor shifts every formant
    const double f_shifted = freqs[c] / spk.vtl;
    const double tilt = tilt_gain(spk, freqs[c]);
    amp0[c] = envelope(sym, f_shifted, 0.0) * tilt;
    amp1[c] = envelope(sym, f_shifted, 1.0) * tilt;
    phases[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  std::vector<double> out(n_samples, 0.0);
  const double inv_n = 1.0 / static_cast<double>(std::max<std::size_t>(1, n_samples - 1));
  for (std::size_t c = 0; c < freqs.size(); ++c) {
    const double w = 2.0 * std::numbers::pi * freqs[c] / sample_rate;
    const double a0 = amp0[c];
    const double da = (amp1[c] - amp0[c]) * inv_n;
    for (std::size_t t = 0; t < n_samples; ++t) {
      out[t] += (a0 + da * static_cast<double>(t)) *
                std::cos(w * static_cast<double>(t) + phases[c]);
    }
  }
  // segment-coherent tremolo: big frame-to-frame level changes that remain
  // predictable from the segment's history
  {
    const double w_am = 2.0 * std::numbers::pi * sym.am_rate / sample_rate;
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t t = 0; t < n_samples; ++t) {
      out[t] *= std::exp(sym.am_depth * std::sin(w_am * static_cast<double>(t) + phi));
    }
  }
  // normalize RMS, then jitter the level
  double rms = 0.0;
  for (const double v : out) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n_samples));
  const double gain = (rms > 0 ? 0.15 / rms : 0.0) * rng.uniform(0.8, 1.25);
  const std::size_t fade = std::min<std::size_t>(n_samples / 4, 160);
  for (std::size_t t = 0; t < n_samples; ++t) {
    double g = gain;
    if (t < fade) {
      g *= 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(t) /
                                static_cast<double>(fade));
    }
    if (n_samples - 1 - t < fade) {
      g *= 0.5 - 0.5 * std::cos(std::numbers::pi *
                                static_cast<double>(n_samples - 1 - t) /
                                static_cast<double>(fade));
    }
    out[t] *= g;
  }
  return out;
}

std::string symbol_name(std::size_t i) {
  return std::string(1, static_cast<char>('a' + i));
}

std::string join_transcript(const LabelSequence& t,
                            const LabelVocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ' ';
    out += vocab.symbols[t[i]];
  }
  return out;
}

void write_split(std::ostream& os, const char* name,
                 const std::vector<Utterance>& utts,
                 const LabelVocabulary& vocab, bool with_transcripts) {
  for (const auto& u : utts) {
    os << name << '\t' << u.utterance_id << '\t' << u.speaker_id << '\t'
       << u.wav_path << '\t';
    if (with_transcripts && u.transcript.has_value()) {
      os << join_transcript(*u.transcript, vocab);
    } else {
      os << '-';
    }
    os << '\n';
  }
}

}  // namespace

std::string CorpusManifest::resolve(const std::string& rel_path) const {
  if (base_dir.empty() || fs::path(rel_path).is_absolute()) return rel_path;
  return (fs::path(base_dir) / rel_path).string();
}

void CorpusManifest::save(const std::string& manifest_path) const {
  const fs::path dir = fs::path(manifest_path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  std::ofstream os(manifest_path, std::ios::trunc);
  if (!os) {
    throw std::runtime_error("manifest '" + manifest_path + "': cannot open for writing");
  }
  os << "# decoar corpus manifest v1\n";
  os << "# vocab=" << vocab_file << "\n";
  if (!note.empty()) os << "# note=" << note << "\n";
  write_split(os, "unlabeled_pool", unlabeled_pool, vocabulary, false);
  write_split(os, "labeled_train", labeled_train, vocabulary, true);
  write_split(os, "dev", dev, vocabulary, true);
  write_split(os, "test", test, vocabulary, true);
  if (!os) throw std::runtime_error("manifest '" + manifest_path + "': write error");
  vocabulary.save((dir / vocab_file).string());
}

CorpusManifest CorpusManifest::load(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("manifest '" + manifest_path + "': cannot open");
  CorpusManifest m;
  m.base_dir = fs::path(manifest_path).parent_path().string();

  std::string line;
  std::size_t line_no = 0;
  bool vocab_loaded = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# vocab=", 0) == 0) {
        m.vocab_file = line.substr(8);
        m.vocabulary = LabelVocabulary::load(m.resolve(m.vocab_file));
        vocab_loaded = true;
      } else if (line.rfind("# note=", 0) == 0) {
        m.note = line.substr(7);
      }
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 5) {
      throw std::runtime_error("manifest '" + manifest_path + "' line " +
                               std::to_string(line_no) + ": expected 5 fields, got " +
                               std::to_string(fields.size()));
    }
    if (!vocab_loaded) {
      throw std::runtime_error("manifest '" + manifest_path +
                               "': no '# vocab=' header before records");
    }
    Utterance u;
    u.utterance_id = fields[1];
    u.speaker_id = fields[2];
    u.wav_path = fields[3];
    if (fields[4] != "-") {
      LabelSequence ids;
      std::stringstream ts(fields[4]);
      std::string sym;
      while (ts >> sym) ids.push_back(m.vocabulary.index_of(sym));
      u.transcript = std::move(ids);
    }
    if (fields[0] == "unlabeled_pool") {
      u.transcript.reset();  // withheld regardless of file contents
      m.unlabeled_pool.push_back(std::move(u));
    } else if (fields[0] == "labeled_train") {
      m.labeled_train.push_back(std::move(u));
    } else if (fields[0] == "dev") {
      m.dev.push_back(std::move(u));
    } else if (fields[0] == "test") {
      m.test.push_back(std::move(u));
    } else {
      throw std::runtime_error("manifest '" + manifest_path + "' line " +
                               std::to_string(line_no) + ": unknown split '" +
                               fields[0] + "'");
    }
  }
  return m;
}

CorpusManifest generate_synthetic(const SyntheticConfig& config,
                                  std::uint64_t seed,
                                  const std::string& out_dir) {
  if (config.vocab_size < 2 || config.vocab_size > 26) {
    throw std::invalid_argument("generate_synthetic: vocab_size must be in [2, 26]");
  }
  if (config.n_speakers < 1 || config.n_utterances < 4) {
    throw std::invalid_argument("generate_synthetic: need >= 1 speaker and >= 4 utterances");
  }
  fs::create_directories(fs::path(out_dir) / "wav");

  const Rng root(seed);
  const auto symbols = make_symbol_specs(config.vocab_size, root.substream("symbols"));
  const auto speakers = make_speaker_specs(config.n_speakers, config.vtl_min,
                                           config.vtl_max, root.substream("speakers"));

  CorpusManifest manifest;
  manifest.base_dir = out_dir;
  manifest.note = "synthetic corpus; dev/test speakers overlap train";
  for (std::size_t i = 0; i < config.vocab_size; ++i) {
    manifest.vocabulary.symbols.push_back(symbol_name(i));
  }

  std::vector<Utterance> all;
  for (std::size_t u = 0; u < config.n_utterances; ++u) {
    Rng rng = root.substream("utt", u);
    const std::size_t spk = u % config.n_speakers;
    const std::size_t n_syms =
        config.min_symbols +
        rng.uniform_int(config.max_symbols - config.min_symbols + 1);

    LabelSequence transcript;
    std::vector<double> samples;
    for (std::size_t sy = 0; sy < n_syms; ++sy) {
      const std::size_t sym = rng.uniform_int(config.vocab_size);
      transcript.push_back(sym);
      const double ms = rng.uniform(config.min_segment_ms, config.max_segment_ms);
      const auto n_samp = static_cast<std::size_t>(
          std::llround(ms * static_cast<double>(config.sample_rate) / 1000.0));
      const auto seg = synth_segment(symbols[sym], speakers[spk],
                                     static_cast<double>(config.sample_rate),
                                     n_samp, rng);
      samples.insert(samples.end(), seg.begin(), seg.end());
    }
    double peak = 0.0;
    for (const double v : samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.7) {
      for (double& v : samples) v *= 0.7 / peak;
    }

    char uid[32];
    std::snprintf(uid, sizeof(uid), "utt%04zu", u);
    char sid[32];
    std::snprintf(sid, sizeof(sid), "spk%02zu", spk);

    Utterance utt;
    utt.utterance_id = uid;
    utt.speaker_id = sid;
    utt.wav_path = std::string("wav/") + uid + ".wav";
    utt.transcript = std::move(transcript);
    write_wav((fs::path(out_dir) / utt.wav_path).string(), samples,
              config.sample_rate);
    all.push_back(std::move(utt));
  }

  // deterministic split assignment
  std::vector<std::size_t> order(all.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = root.substream("splits");
  split_rng.shuffle(order);
  const auto n_labeled = static_cast<std::size_t>(
      std::llround(config.labeled_fraction * static_cast<double>(all.size())));
  const auto n_dev = static_cast<std::size_t>(
      std::llround(config.dev_fraction * static_cast<double>(all.size())));
  const auto n_test = static_cast<std::size_t>(
      std::llround(config.test_fraction * static_cast<double>(all.size())));
  if (n_labeled + n_dev + n_test >= all.size()) {
    throw std::invalid_argument("generate_synthetic: split fractions leave no unlabeled pool");
  }
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n_labeled; ++i) {
    manifest.labeled_train.push_back(all[order[pos++]]);
  }
  for (std::size_t i = 0; i < n_dev; ++i) manifest.dev.push_back(all[order[pos++]]);
  for (std::size_t i = 0; i < n_test; ++i) manifest.test.push_back(all[order[pos++]]);
  while (pos < order.size()) {
    Utterance u = all[order[pos++]];
    u.transcript.reset();  // pool transcripts are withheld
    manifest.unlabeled_pool.push_back(std::move(u));
  }

  manifest.save((fs::path(out_dir) / "manifest.tsv").string());
  return manifest;
}

CorpusManifest split_labeled_fraction(const CorpusManifest& manifest,
                                      double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw std::invalid_argument("split_labeled_fraction: fraction must be in (0, 1]");
  }
  if (fraction == 1.0) return manifest;
  const std::size_t n = manifest.labeled_train.size();
  const auto keep = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  if (keep == 0) {
    throw std::invalid_argument(
        "split_labeled_fraction: fraction " + std::to_string(fraction) +
        " of " + std::to_string(n) + " utterances leaves none");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).substream("labeled_fraction");
  rng.shuffle(order);
  order.resize(keep);
  std::sort(order.begin(), order.end());

  CorpusManifest out = manifest;
  out.labeled_train.clear();
  for (const std::size_t i : order) {
    out.labeled_train.push_back(manifest.labeled_train[i]);
  }
  return out;
}

}  // namespace decoar
