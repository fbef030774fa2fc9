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

#include "decoar/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "decoar/checkpoint.hpp"

namespace decoar {

namespace {

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Unit-peak triangular filters on a mel-spaced grid, evaluated at the DFT
// bin frequencies. Returns n_mels rows of (nfft/2 + 1) weights.
std::vector<std::vector<double>> mel_filterbank(std::size_t n_mels,
                                                double sample_rate,
                                                std::size_t nfft) {
  const std::size_t nbins = nfft / 2 + 1;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) *
                                      static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }
  std::vector<std::vector<double>> filters(n_mels,
                                           std::vector<double>(nbins, 0.0));
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double f_lo = edges[m], f_c = edges[m + 1], f_hi = edges[m + 2];
    for (std::size_t k = 0; k < nbins; ++k) {
      const double f = sample_rate * static_cast<double>(k) /
                       static_cast<double>(nfft);
      double w = 0.0;
      if (f > f_lo && f < f_c) {
        w = (f - f_lo) / (f_c - f_lo);
      } else if (f >= f_c && f < f_hi) {
        w = (f_hi - f) / (f_hi - f_c);
      }
      filters[m][k] = w;
    }
  }
  return filters;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 4);
}
void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 8);
}
std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr char kCacheMagic[4] = {'D', 'F', 'B', 'K'};

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_center_frequencies(std::size_t n_mels,
                                           double sample_rate) {
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    centers[m] = mel_to_hz(mel_hi * static_cast<double>(m + 1) /
                           static_cast<double>(n_mels + 1));
  }
  return centers;
}

std::size_t frame_count(std::size_t n_samples, std::size_t window,
                        std::size_t hop) {
  if (n_samples < window) return 0;
  return (n_samples - window) / hop + 1;
}

FeatureSequence compute_logmel(const AudioBuffer& audio,
                               const LogMelConfig& config) {
  if (audio.sample_rate == 0) {
    throw std::invalid_argument("compute_logmel: sample rate is zero");
  }
  const auto window = static_cast<std::size_t>(
      std::llround(config.window_ms * static_cast<double>(audio.sample_rate) / 1000.0));
  const auto hop = static_cast<std::size_t>(
      std::llround(config.hop_ms * static_cast<double>(audio.sample_rate) / 1000.0));
  const std::size_t n = audio.samples.size();
  if (n < window) {
    throw std::invalid_argument(
        "compute_logmel: utterance '" + audio.utterance_id + "' has " +
        std::to_string(n) + " samples, shorter than one " +
        std::to_string(window) + "-sample window");
  }
  const std::size_t frames = frame_count(n, window, hop);
  const std::size_t nfft = next_pow2(window);
  const std::size_t nbins = nfft / 2 + 1;

  std::vector<double> hann(window);
  for (std::size_t i = 0; i < window; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                   static_cast<double>(i) /
                                   static_cast<double>(window));
  }
  const auto filters =
      mel_filterbank(config.n_mels, static_cast<double>(audio.sample_rate), nfft);

  Tensor out(Shape{frames, config.n_mels});
  std::vector<std::complex<double>> buf(nfft);
  std::vector<double> mag(nbins);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = audio.samples.data() + t * hop;
    for (std::size_t i = 0; i < window; ++i) buf[i] = src[i] * hann[i];
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(window), buf.end(),
              std::complex<double>(0.0));
    fft(buf);
    for (std::size_t k = 0; k < nbins; ++k) mag[k] = std::abs(buf[k]);
    for (std::size_t m = 0; m < config.n_mels; ++m) {
      double e = 0.0;
      const auto& f = filters[m];
      for (std::size_t k = 0; k < nbins; ++k) e += f[k] * mag[k];
      out.at(t, m) = std::log(std::max(e, config.floor));
    }
  }

  FeatureSequence seq;
  seq.frames = std::move(out);
  seq.utterance_id = audio.utterance_id;
  seq.speaker_id = audio.speaker_id;
  seq.normalized = false;
  return seq;
}

std::map<std::string, SpeakerStats> accumulate_speaker_stats(
    const std::vector<FeatureSequence>& sequences) {
  std::map<std::string, SpeakerStats> stats;
  std::map<std::string, std::vector<double>> sum, sumsq;
  for (const FeatureSequence& seq : sequences) {
    if (seq.normalized) {
      throw std::invalid_argument(
          "accumulate_speaker_stats: sequence '" + seq.utterance_id +
          "' is already normalized");
    }
    const std::size_t d = seq.dim();
    auto& st = stats[seq.speaker_id];
    auto& s = sum[seq.speaker_id];
    auto& s2 = sumsq[seq.speaker_id];
    if (s.empty()) {
      st.speaker_id = seq.speaker_id;
      s.assign(d, 0.0);
      s2.assign(d, 0.0);
    } else if (s.size() != d) {
      throw std::invalid_argument(
          "accumulate_speaker_stats: inconsistent feature dim for speaker '" +
          seq.speaker_id + "'");
    }
    for (std::size_t t = 0; t < seq.num_frames(); ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        const double v = seq.frames(t, j);
        s[j] += v;
        s2[j] += v * v;
      }
    }
    st.frame_count += seq.num_frames();
  }
  for (auto& [spk, st] : stats) {
    if (st.frame_count == 0) {
      throw std::invalid_argument("accumulate_speaker_stats: empty pool for speaker '" + spk + "'");
    }
    const double n = static_cast<double>(st.frame_count);
    const std::size_t d = sum[spk].size();
    st.mean.resize(d);
    st.variance.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      st.mean[j] = sum[spk][j] / n;
      const double var = sumsq[spk][j] / n - st.mean[j] * st.mean[j];
      st.variance[j] = std::max(var, kVarianceFloor);
    }
  }
  return stats;
}

FeatureSequence apply_cmvn(const FeatureSequence& seq,
                           const SpeakerStats& stats) {
  if (seq.speaker_id != stats.speaker_id) {
    throw std::invalid_argument("apply_cmvn: sequence speaker '" +
                                seq.speaker_id + "' does not match stats speaker '" +
                                stats.speaker_id + "'");
  }
  const std::size_t d = seq.dim();
  if (stats.mean.size() != d) {
    throw std::invalid_argument("apply_cmvn: stats dim " +
                                std::to_string(stats.mean.size()) +
                                " vs feature dim " + std::to_string(d));
  }
  FeatureSequence out;
  out.utterance_id = seq.utterance_id;
  out.speaker_id = seq.speaker_id;
  out.normalized = true;
  out.frames = Tensor(Shape{seq.num_frames(), d});
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      out.frames.at(t, j) =
          (seq.frames(t, j) - stats.mean[j]) / std::sqrt(stats.variance[j]);
    }
  }
  return out;
}

void save_feature_sequence(const std::string& path,
                           const FeatureSequence& seq) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("feature cache '" + path + "': cannot open for writing");
  os.write(kCacheMagic, 4);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(seq.utterance_id.size()));
  os.write(seq.utterance_id.data(), static_cast<std::streamsize>(seq.utterance_id.size()));
  put_u32(os, static_cast<std::uint32_t>(seq.speaker_id.size()));
  os.write(seq.speaker_id.data(), static_cast<std::streamsize>(seq.speaker_id.size()));
  put_u32(os, seq.normalized ? 1 : 0);
  put_u64(os, seq.num_frames());
  put_u64(os, seq.dim());
  for (const double v : seq.frames.value()) {
    put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw std::runtime_error("feature cache '" + path + "': write error");
}

FeatureSequence load_feature_sequence(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("feature cache '" + path + "': cannot open");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCacheMagic, 4) != 0) {
    throw std::runtime_error("feature cache '" + path + "': bad magic");
  }
  const std::uint32_t version = get_u32(is);
  if (version != 1) {
    throw std::runtime_error("feature cache '" + path + "': unsupported version " +
                             std::to_string(version));
  }
  FeatureSequence seq;
  const std::uint32_t uid_len = get_u32(is);
  seq.utterance_id.resize(uid_len);
  is.read(seq.utterance_id.data(), uid_len);
  const std::uint32_t spk_len = get_u32(is);
  seq.speaker_id.resize(spk_len);
  is.read(seq.speaker_id.data(), spk_len);
  seq.normalized = get_u32(is) != 0;
  const std::uint64_t t = get_u64(is);
  const std::uint64_t d = get_u64(is);
  std::vector<double> values(t * d);
  for (auto& v : values) v = std::bit_cast<double>(get_u64(is));
  if (!is) throw std::runtime_error("feature cache '" + path + "': truncated");
  seq.frames = Tensor(Shape{static_cast<std::size_t>(t), static_cast<std::size_t>(d)},
                      std::move(values));
  return seq;
}

void save_speaker_stats(const std::string& path,
                        const std::map<std::string, SpeakerStats>& stats) {
  std::vector<std::pair<std::string, Tensor>> entries;
  for (const auto& [spk, st] : stats) {
    entries.emplace_back("speaker." + spk + ".mean",
                         Tensor::row_vector(st.mean));
    entries.emplace_back("speaker." + spk + ".variance",
                         Tensor::row_vector(st.variance));
    entries.emplace_back("speaker." + spk + ".frames",
                         Tensor::scalar(static_cast<double>(st.frame_count)));
  }
  save_checkpoint(path, entries);
}

std::map<std::string, SpeakerStats> load_speaker_stats(const std::string& path) {
  std::map<std::string, SpeakerStats> stats;
  for (const auto& [key, tensor] : load_checkpoint(path)) {
    // key = speaker.<id>.<field>; ids do not contain dots
    const std::size_t p0 = key.find('.');
    const std::size_t p1 = key.rfind('.');
    if (p0 == std::string::npos || p1 <= p0) continue;
    const std::string spk = key.substr(p0 + 1, p1 - p0 - 1);
    const std::string field = key.substr(p1 + 1);
    auto& st = stats[spk];
    st.speaker_id = spk;
    const auto vals = tensor.value();
    if (field == "mean") {
      st.mean.assign(vals.begin(), vals.end());
    } else if (field == "variance") {
      st.variance.assign(vals.begin(), vals.end());
    } else if (field == "frames") {
      st.frame_count = static_cast<std::size_t>(vals[0]);
    }
  }
  return stats;
}

}  // namespace decoar
