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

#include "decoar/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "decoar/checkpoint.hpp"

namespace decoar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double log_sum_exp(double a, double b, double c) {
  return log_sum_exp(log_sum_exp(a, b), c);
}

// Blank-interleaved extended sequence: [b, y1, b, y2, ..., yL, b].
std::vector<std::size_t> extend_with_blanks(const LabelSequence& target,
                                            std::size_t blank) {
  std::vector<std::size_t> ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

std::size_t min_frames_for(const LabelSequence& target) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++repeats;
  }
  return target.size() + repeats;
}

void validate(const Tensor& log_probs, const LabelSequence& target) {
  if (log_probs.ndim() != 2 || log_probs.cols() < 2) {
    throw std::invalid_argument("ctc: log_probs must be T×num_classes, got " +
                                shape_str(log_probs.shape()));
  }
  if (target.empty()) {
    throw std::invalid_argument("ctc: empty target is not a valid training label sequence");
  }
  const std::size_t blank = log_probs.cols() - 1;
  for (const std::size_t id : target) {
    if (id >= blank) {
      throw std::invalid_argument("ctc: target id " + std::to_string(id) +
                                  " out of vocabulary (blank is " +
                                  std::to_string(blank) + ")");
    }
  }
  const std::size_t need = min_frames_for(target);
  if (log_probs.rows() < need) {
    throw InfeasibleAlignmentError(log_probs.rows(), need);
  }
}

// Forward log-alphas, T × S. alpha[t][s] includes the emission at t.
std::vector<std::vector<double>> forward_alphas(
    const Tensor& lp, const std::vector<std::size_t>& ext) {
  const std::size_t frames = lp.rows();
  const std::size_t s_len = ext.size();
  const std::size_t blank = lp.cols() - 1;
  std::vector<std::vector<double>> alpha(frames,
                                         std::vector<double>(s_len, kNegInf));
  alpha[0][0] = lp(0, ext[0]);
  if (s_len > 1) alpha[0][1] = lp(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < s_len; ++s) {
      double acc = alpha[t - 1][s];
      if (s >= 1) acc = log_sum_exp(acc, alpha[t - 1][s - 1]);
      if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]) {
        acc = log_sum_exp(acc, alpha[t - 1][s - 2]);
      }
      alpha[t][s] = acc == kNegInf ? kNegInf : acc + lp(t, ext[s]);
    }
  }
  return alpha;
}

// Backward log-betas; beta[t][s] includes the emission at t.
std::vector<std::vector<double>> backward_betas(
    const Tensor& lp, const std::vector<std::size_t>& ext) {
  const std::size_t frames = lp.rows();
  const std::size_t s_len = ext.size();
  const std::size_t blank = lp.cols() - 1;
  std::vector<std::vector<double>> beta(frames,
                                        std::vector<double>(s_len, kNegInf));
  beta[frames - 1][s_len - 1] = lp(frames - 1, ext[s_len - 1]);
  if (s_len > 1) beta[frames - 1][s_len - 2] = lp(frames - 1, ext[s_len - 2]);
  for (std::size_t ti = frames - 1; ti-- > 0;) {
    for (std::size_t s = 0; s < s_len; ++s) {
      double acc = beta[ti + 1][s];
      if (s + 1 < s_len) acc = log_sum_exp(acc, beta[ti + 1][s + 1]);
      if (s + 2 < s_len && ext[s + 2] != blank && ext[s + 2] != ext[s]) {
        acc = log_sum_exp(acc, beta[ti + 1][s + 2]);
      }
      beta[ti][s] = acc == kNegInf ? kNegInf : acc + lp(ti, ext[s]);
    }
  }
  return beta;
}

double total_log_prob(const std::vector<std::vector<double>>& alpha) {
  const auto& last = alpha.back();
  const std::size_t s_len = last.size();
  return s_len > 1 ? log_sum_exp(last[s_len - 1], last[s_len - 2])
                   : last[s_len - 1];
}

}  // namespace

std::size_t LabelVocabulary::index_of(const std::string& symbol) const {
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] == symbol) return i;
  }
  throw std::invalid_argument("vocabulary: unknown symbol '" + symbol + "'");
}

LabelVocabulary LabelVocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("vocabulary '" + path + "': cannot open");
  LabelVocabulary v;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen.insert(line).second) {
      throw std::runtime_error("vocabulary '" + path + "': duplicate symbol '" + line + "'");
    }
    v.symbols.push_back(line);
  }
  if (v.symbols.empty()) {
    throw std::runtime_error("vocabulary '" + path + "': no symbols");
  }
  return v;
}

void LabelVocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("vocabulary '" + path + "': cannot open for writing");
  for (const auto& s : symbols) os << s << "\n";
}

Tensor log_softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) {
    throw std::invalid_argument("log_softmax_rows: expected 2-d tensor, got " +
                                shape_str(logits.shape()));
  }
  const std::size_t m = logits.rows(), n = logits.cols();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mx = kNegInf;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, logits(i, j));
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += std::exp(logits(i, j) - mx);
    const double lse = mx + std::log(acc);
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = logits(i, j) - lse;
  }
  return out;
}

double ctc_loss(const Tensor& log_probs, const LabelSequence& target) {
  validate(log_probs, target);
  const auto ext = extend_with_blanks(target, log_probs.cols() - 1);
  const auto alpha = forward_alphas(log_probs, ext);
  return -total_log_prob(alpha);
}

Tensor ctc_grad(const Tensor& log_probs, const LabelSequence& target) {
  validate(log_probs, target);
  const std::size_t frames = log_probs.rows();
  const std::size_t classes = log_probs.cols();
  const auto ext = extend_with_blanks(target, classes - 1);
  const auto alpha = forward_alphas(log_probs, ext);
  const auto beta = backward_betas(log_probs, ext);
  const double log_p = total_log_prob(alpha);

  Tensor grad(Shape{frames, classes});
  for (std::size_t t = 0; t < frames; ++t) {
    // occupancy gamma_{t,k} = sum_{s: ext[s]=k} exp(alpha + beta - lp - logP);
    // alpha and beta both include the emission at t, so divide it out once.
    std::vector<double> log_gamma(classes, kNegInf);
    for (std::size_t s = 0; s < ext.size(); ++s) {
      const double ab = alpha[t][s] + beta[t][s];
      if (ab == kNegInf) continue;
      const std::size_t k = ext[s];
      log_gamma[k] = log_sum_exp(log_gamma[k], ab - log_probs(t, k));
    }
    for (std::size_t k = 0; k < classes; ++k) {
      const double softmax = std::exp(log_probs(t, k));
      const double gamma =
          log_gamma[k] == kNegInf ? 0.0 : std::exp(log_gamma[k] - log_p);
      grad.at(t, k) = softmax - gamma;
    }
  }
  return grad;
}

Tensor ctc_loss_node(const Tensor& logits, const LabelSequence& target) {
  const Tensor lp = log_softmax_rows(logits);
  const double nll = ctc_loss(lp, target);
  Tensor out = Tensor::scalar(nll);
  Tape* tape = active_tape();
  if (tape != nullptr && (logits.requires_grad() || logits.on_graph())) {
    out.mark_on_graph();
    Tensor lc = logits, oc = out;
    LabelSequence tc = target;
    tape->record([lc, oc, tc]() mutable {
      if (!oc.has_grad()) return;
      const double g = oc.grad()[0];
      const Tensor local = ctc_grad(log_softmax_rows(lc), tc);
      double* gl = lc.grad_buffer().data();
      const double* lv = local.value().data();
      for (std::size_t i = 0; i < lc.numel(); ++i) gl[i] += g * lv[i];
    });
  }
  return out;
}

LabelSequence greedy_decode(const Tensor& log_probs) {
  if (log_probs.ndim() != 2) {
    throw std::invalid_argument("greedy_decode: expected 2-d tensor");
  }
  const std::size_t blank = log_probs.cols() - 1;
  LabelSequence out;
  std::size_t prev = blank;
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < log_probs.cols(); ++k) {
      if (log_probs(t, k) > log_probs(t, best)) best = k;
    }
    if (best != blank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

LabelSequence prefix_beam_decode(const Tensor& log_probs,
                                 std::size_t beam_width) {
  if (beam_width < 1) {
    throw std::invalid_argument("prefix_beam_decode: beam_width must be >= 1");
  }
  const std::size_t blank = log_probs.cols() - 1;

  struct Mass {
    double blank_lp = kNegInf;     // prefix realized, last frame blank
    double nonblank_lp = kNegInf;  // prefix realized, last frame = last symbol
    double total() const { return log_sum_exp(blank_lp, nonblank_lp); }
  };
  // std::map keys iterate lexicographically, which both fixes the
  // accumulation order and implements the tie-break rule.
  std::map<LabelSequence, Mass> beams;
  beams[{}] = Mass{0.0, kNegInf};

  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    std::map<LabelSequence, Mass> next;
    for (const auto& [prefix, mass] : beams) {
      const double tot = mass.total();
      // stay on the same prefix via blank
      {
        Mass& m = next[prefix];
        m.blank_lp = log_sum_exp(m.blank_lp, tot + log_probs(t, blank));
      }
      for (std::size_t c = 0; c < blank; ++c) {
        const double lp_c = log_probs(t, c);
        if (!prefix.empty() && prefix.back() == c) {
          // repeated emission extends the same prefix...
          Mass& same = next[prefix];
          same.nonblank_lp =
              log_sum_exp(same.nonblank_lp, mass.nonblank_lp + lp_c);
          // ...while a blank-separated repeat grows it
          LabelSequence grown = prefix;
          grown.push_back(c);
          Mass& g = next[grown];
          g.nonblank_lp = log_sum_exp(g.nonblank_lp, mass.blank_lp + lp_c);
        } else {
          LabelSequence grown = prefix;
          grown.push_back(c);
          Mass& g = next[grown];
          g.nonblank_lp = log_sum_exp(g.nonblank_lp, tot + lp_c);
        }
      }
    }
    if (next.size() > beam_width) {
      std::vector<std::pair<LabelSequence, Mass>> ranked(next.begin(),
                                                         next.end());
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) {
                         return a.second.total() > b.second.total();
                       });
      ranked.resize(beam_width);
      next = std::map<LabelSequence, Mass>(ranked.begin(), ranked.end());
    }
    beams = std::move(next);
  }

  LabelSequence best;
  double best_lp = kNegInf;
  for (const auto& [prefix, mass] : beams) {
    const double tot = mass.total();
    if (tot > best_lp) {  // map order makes ties resolve lexicographically
      best_lp = tot;
      best = prefix;
    }
  }
  return best;
}

EditCounts edit_distance(const LabelSequence& ref, const LabelSequence& hyp) {
  const std::size_t m = ref.size(), n = hyp.size();
  std::vector<std::vector<std::size_t>> d(m + 1,
                                          std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 0; i <= m; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= n; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const std::size_t del = d[i - 1][j] + 1;
      const std::size_t ins = d[i][j - 1] + 1;
      d[i][j] = std::min({sub, del, ins});
    }
  }
  EditCounts counts;
  counts.distance = d[m][n];
  // Deterministic backtrace: prefer diagonal, then deletion, then insertion.
  std::size_t i = m, j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++counts.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

double error_rate(const EditCounts& counts, std::size_t ref_len) {
  if (ref_len == 0) {
    return counts.distance == 0 ? 0.0
                                : std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(counts.distance) / static_cast<double>(ref_len);
}

CtcHead CtcHead::init(const CtcHeadConfig& config, Rng& rng) {
  if (config.input_dim == 0 || config.num_classes < 2) {
    throw std::invalid_argument("CtcHead: input_dim and num_classes required");
  }
  CtcHead head;
  head.config = config;
  const double pb = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
  Rng pr = rng.substream("proj");
  head.proj_w = Tensor::uniform({config.input_dim, config.proj_dim}, -pb, pb, pr);
  head.proj_b = Tensor(Shape{1, config.proj_dim});
  Rng br = rng.substream("blstm");
  head.blstm = BlstmStack::init(config.proj_dim, config.hidden, config.layers,
                                /*bidirectional=*/true, br);
  const double ob = 1.0 / std::sqrt(static_cast<double>(2 * config.hidden));
  Rng orr = rng.substream("out");
  head.out_w = Tensor::uniform({2 * config.hidden, config.num_classes}, -ob, ob, orr);
  head.out_b = Tensor(Shape{1, config.num_classes});
  for (Tensor* t : {&head.proj_w, &head.proj_b, &head.out_w, &head.out_b}) {
    t->set_requires_grad();
  }
  return head;
}

Tensor CtcHead::logits(const Tensor& features) const {
  if (features.ndim() != 2 || features.cols() != config.input_dim) {
    throw std::invalid_argument("CtcHead: feature shape " +
                                shape_str(features.shape()) +
                                " does not match input dim " +
                                std::to_string(config.input_dim));
  }
  const Tensor projected = add_bias(matmul(features, proj_w), proj_b);
  const ContextStates states = blstm_stack_forward(blstm, projected);
  const Tensor cat = concat_cols({states.forward, states.backward});
  return add_bias(matmul(cat, out_w), out_b);
}

std::vector<std::pair<std::string, Tensor>> CtcHead::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("head.proj.w", proj_w);
  out.emplace_back("head.proj.b", proj_b);
  for (auto& e : blstm.named_parameters("head.blstm.")) out.push_back(e);
  out.emplace_back("head.out.w", out_w);
  out.emplace_back("head.out.b", out_b);
  return out;
}

CtcHead CtcHead::clone() const {
  CtcHead head;
  head.config = config;
  head.proj_w = proj_w.clone();
  head.proj_b = proj_b.clone();
  head.blstm = blstm.clone();
  head.out_w = out_w.clone();
  head.out_b = out_b.clone();
  return head;
}

void CtcHead::save(const std::string& path) const {
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.emplace_back(
      "head.config",
      Tensor(Shape{5}, {static_cast<double>(config.input_dim),
                        static_cast<double>(config.proj_dim),
                        static_cast<double>(config.hidden),
                        static_cast<double>(config.layers),
                        static_cast<double>(config.num_classes)}));
  for (auto& e : named_parameters()) entries.push_back(e);
  save_checkpoint(path, entries);
}

CtcHead CtcHead::load(const std::string& path) {
  const auto entries = load_checkpoint_map(path);
  const auto it = entries.find("head.config");
  if (it == entries.end()) {
    throw std::runtime_error("checkpoint '" + path + "': missing head.config");
  }
  const auto cv = it->second.value();
  CtcHeadConfig config;
  config.input_dim = static_cast<std::size_t>(cv[0]);
  config.proj_dim = static_cast<std::size_t>(cv[1]);
  config.hidden = static_cast<std::size_t>(cv[2]);
  config.layers = static_cast<std::size_t>(cv[3]);
  config.num_classes = static_cast<std::size_t>(cv[4]);
  Rng rng(0);
  CtcHead head = CtcHead::init(config, rng);
  for (auto& [name, param] : head.named_parameters()) {
    const auto pit = entries.find(name);
    if (pit == entries.end()) {
      throw std::runtime_error("checkpoint '" + path + "': missing parameter " + name);
    }
    param.copy_value_from(pit->second);
  }
  return head;
}

}  // namespace decoar
