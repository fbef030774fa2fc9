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

#include "decoar/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace decoar {

namespace {

// C += A·B, all row-major. The i-k-j order keeps the inner loop contiguous
// over B and C rows so it auto-vectorizes; processing four A rows per pass
// reuses each B row from cache. Per C element the additions still happen in
// ascending p order, so the blocked and plain paths are bit-identical.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = brow[j];
        c0[j] += v0 * bj;
        c1[j] += v1 * bj;
        c2[j] += v2 * bj;
        c3[j] += v3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// dA += dC·Bᵀ without materializing the transpose: row i of dA gets dot
// products of dC row i against the rows of B. Four dots share one pass.
void gemm_acc_nt(const double* dc, const double* b, double* da, std::size_t m,
                 std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = dc + i * n;
    double* dai = da + i * k;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const double* b0 = b + p * n;
      const double* b1 = b0 + n;
      const double* b2 = b1 + n;
      const double* b3 = b2 + n;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double g = gi[j];
        s0 += g * b0[j];
        s1 += g * b1[j];
        s2 += g * b2[j];
        s3 += g * b3[j];
      }
      dai[p] += s0;
      dai[p + 1] += s1;
      dai[p + 2] += s2;
      dai[p + 3] += s3;
    }
    for (; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gi[j] * bp[j];
      dai[p] += s;
    }
  }
}

// dB += Aᵀ·dC as a sum of outer products, accumulated in ascending i order.
void gemm_acc_tn(const double* a, const double* dc, double* db, std::size_t m,
                 std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      double* dbp = db + p * n;
      for (std::size_t j = 0; j < n; ++j) dbp[j] += aip * gi[j];
    }
  }
}

thread_local Tape* g_active_tape = nullptr;

bool tracked(const Tensor& t) { return t.requires_grad() || t.on_graph(); }

// True when the op should be recorded; marks the output as a graph node.
bool begin_record(Tensor& out, bool any_input_tracked) {
  if (g_active_tape == nullptr || !any_input_tracked) return false;
  out.mark_on_graph();
  return true;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

void check_2d(const char* op, const Tensor& t) {
  if (t.ndim() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected 2-d tensor, got " +
                                shape_str(t.shape()));
  }
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : s_(std::make_shared<detail::TensorStorage>()) {
  std::size_t n = 1;
  for (const std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_str(shape));
    n *= d;
  }
  s_->shape = std::move(shape);
  s_->value.assign(n, fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : s_(std::make_shared<detail::TensorStorage>()) {
  std::size_t n = 1;
  for (const std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_str(shape));
    n *= d;
  }
  if (n != values.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " wants " +
                                std::to_string(n) + " values, got " +
                                std::to_string(values.size()));
  }
  s_->shape = std::move(shape);
  s_->value = std::move(values);
}

Tensor Tensor::row_vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{1, n}, std::move(v));
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("from_rows: no rows");
  const std::size_t c = rows[0].size();
  std::vector<double> flat;
  flat.reserve(rows.size() * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw std::invalid_argument("from_rows: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), c}, std::move(flat));
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.s_->value) v = rng.uniform(lo, hi);
  return t;
}

double Tensor::scalar_value() const {
  if (numel() != 1) {
    throw std::invalid_argument("scalar_value: tensor has shape " +
                                shape_str(shape()));
  }
  return s_->value[0];
}

std::span<const double> Tensor::grad() const {
  if (s_->grad.empty()) {
    throw std::logic_error("Tensor::grad: no gradient has been accumulated");
  }
  return s_->grad;
}

std::vector<double>& Tensor::grad_buffer() {
  if (s_->grad.empty()) s_->grad.assign(s_->value.size(), 0.0);
  return s_->grad;
}

void Tensor::zero_grad() {
  std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t;
  t.s_->shape = s_->shape;
  t.s_->value = s_->value;
  t.s_->requires_grad = s_->requires_grad;
  return t;
}

void Tensor::copy_value_from(const Tensor& other) {
  check_same_shape("copy_value_from", *this, other);
  s_->value = other.s_->value;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  Tensor seed = loss;  // handle copy; shares storage
  seed.grad_buffer()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  clear();
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) {
  g_active_tape = &tape;
}
TapeScope::~TapeScope() { g_active_tape = prev_; }

NoGradScope::NoGradScope() : prev_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = prev_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss) {
  if (g_active_tape == nullptr) {
    throw std::logic_error("backward: no active tape");
  }
  g_active_tape->backward(loss);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d("matmul", a);
  check_2d("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  gemm_acc(a.value().data(), b.value().data(), out.value().data(), m, k, n);

  const bool need_a = tracked(a), need_b = tracked(b);
  if (begin_record(out, need_a || need_b)) {
    Tensor ac = a, bc = b, oc = out;
    g_active_tape->record([ac, bc, oc, need_a, need_b, m, k, n]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      if (need_a) {
        gemm_acc_nt(g, bc.value().data(), ac.grad_buffer().data(), m, n, k);
      }
      if (need_b) {
        gemm_acc_tn(ac.value().data(), g, bc.grad_buffer().data(), m, k, n);
      }
    });
  }
  return out;
}

namespace {

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast classify(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.is_scalar()) return Broadcast::kLeftScalar;
  if (b.is_scalar()) return Broadcast::kRightScalar;
  throw std::invalid_argument(std::string(op) +
                              ": incompatible shapes " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast bc = classify("add", a, b);
  const Tensor& big = (bc == Broadcast::kLeftScalar) ? b : a;
  Tensor out(big.shape());
  const std::size_t n = out.numel();
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* ov = out.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    ov[i] = (bc == Broadcast::kLeftScalar ? av[0] : av[i]) +
            (bc == Broadcast::kRightScalar ? bv[0] : bv[i]);
  }
  const bool need_a = tracked(a), need_b = tracked(b);
  if (begin_record(out, need_a || need_b)) {
    Tensor ac = a, bcp = b, oc = out;
    g_active_tape->record([ac, bcp, oc, need_a, need_b, bc, n]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      if (need_a) {
        double* ga = ac.grad_buffer().data();
        if (bc == Broadcast::kLeftScalar) {
          for (std::size_t i = 0; i < n; ++i) ga[0] += g[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
        }
      }
      if (need_b) {
        double* gb = bcp.grad_buffer().data();
        if (bc == Broadcast::kRightScalar) {
          for (std::size_t i = 0; i < n; ++i) gb[0] += g[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
        }
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast bc = classify("sub", a, b);
  const Tensor& big = (bc == Broadcast::kLeftScalar) ? b : a;
  Tensor out(big.shape());
  const std::size_t n = out.numel();
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* ov = out.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    ov[i] = (bc == Broadcast::kLeftScalar ? av[0] : av[i]) -
            (bc == Broadcast::kRightScalar ? bv[0] : bv[i]);
  }
  const bool need_a = tracked(a), need_b = tracked(b);
  if (begin_record(out, need_a || need_b)) {
    Tensor ac = a, bcp = b, oc = out;
    g_active_tape->record([ac, bcp, oc, need_a, need_b, bc, n]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      if (need_a) {
        double* ga = ac.grad_buffer().data();
        if (bc == Broadcast::kLeftScalar) {
          for (std::size_t i = 0; i < n; ++i) ga[0] += g[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
        }
      }
      if (need_b) {
        double* gb = bcp.grad_buffer().data();
        if (bc == Broadcast::kRightScalar) {
          for (std::size_t i = 0; i < n; ++i) gb[0] -= g[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
        }
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast bc = classify("mul", a, b);
  const Tensor& big = (bc == Broadcast::kLeftScalar) ? b : a;
  Tensor out(big.shape());
  const std::size_t n = out.numel();
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* ov = out.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    ov[i] = (bc == Broadcast::kLeftScalar ? av[0] : av[i]) *
            (bc == Broadcast::kRightScalar ? bv[0] : bv[i]);
  }
  const bool need_a = tracked(a), need_b = tracked(b);
  if (begin_record(out, need_a || need_b)) {
    Tensor ac = a, bcp = b, oc = out;
    g_active_tape->record([ac, bcp, oc, need_a, need_b, bc, n]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      const double* av2 = ac.value().data();
      const double* bv2 = bcp.value().data();
      if (need_a) {
        double* ga = ac.grad_buffer().data();
        if (bc == Broadcast::kLeftScalar) {
          for (std::size_t i = 0; i < n; ++i) ga[0] += g[i] * bv2[i];
        } else if (bc == Broadcast::kRightScalar) {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv2[0];
        } else {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv2[i];
        }
      }
      if (need_b) {
        double* gb = bcp.grad_buffer().data();
        if (bc == Broadcast::kRightScalar) {
          for (std::size_t i = 0; i < n; ++i) gb[0] += g[i] * av2[i];
        } else if (bc == Broadcast::kLeftScalar) {
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av2[0];
        } else {
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av2[i];
        }
      }
    });
  }
  return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, Fwd fwd, Bwd bwd_factor_from_in_out) {
  Tensor out(x.shape());
  const std::size_t n = x.numel();
  const double* xv = x.value().data();
  double* ov = out.value().data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);
  if (begin_record(out, tracked(x))) {
    Tensor xc = x, oc = out;
    g_active_tape->record([xc, oc, bwd_factor_from_in_out, n]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      const double* xv2 = xc.value().data();
      const double* ov2 = oc.value().data();
      double* gx = xc.grad_buffer().data();
      for (std::size_t i = 0; i < n; ++i) {
        gx[i] += g[i] * bwd_factor_from_in_out(xv2[i], ov2[i]);
      }
    });
  }
  return out;
}

}  // namespace

Tensor tanh(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (const double v : x.value()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (begin_record(out, tracked(x))) {
    Tensor xc = x, oc = out;
    g_active_tape->record([xc, oc]() mutable {
      if (!oc.has_grad()) return;
      const double g = oc.grad()[0];
      double* gx = xc.grad_buffer().data();
      const std::size_t n = xc.numel();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  check_2d("add_bias", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.numel() != n || bias.rows() != 1) {
    throw std::invalid_argument("add_bias: bias shape " +
                                shape_str(bias.shape()) + " does not match " +
                                shape_str(x.shape()));
  }
  Tensor out(Shape{m, n});
  const double* xv = x.value().data();
  const double* bv = bias.value().data();
  double* ov = out.value().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) ov[i * n + j] = xv[i * n + j] + bv[j];
  const bool need_x = tracked(x), need_b = tracked(bias);
  if (begin_record(out, need_x || need_b)) {
    Tensor xc = x, bc = bias, oc = out;
    g_active_tape->record([xc, bc, oc, need_x, need_b, m, n]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      if (need_x) {
        double* gx = xc.grad_buffer().data();
        for (std::size_t i = 0; i < m * n; ++i) gx[i] += g[i];
      }
      if (need_b) {
        double* gb = bc.grad_buffer().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      }
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  bool any_tracked = false;
  for (const Tensor& p : parts) {
    check_2d("concat_cols", p);
    if (p.rows() != m) {
      throw std::invalid_argument("concat_cols: row mismatch " +
                                  shape_str(parts[0].shape()) + " vs " +
                                  shape_str(p.shape()));
    }
    total += p.cols();
    any_tracked = any_tracked || tracked(p);
  }
  Tensor out(Shape{m, total});
  double* ov = out.value().data();
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t c = p.cols();
    const double* pv = p.value().data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy(pv + i * c, pv + (i + 1) * c, ov + i * total + off);
    off += c;
  }
  if (begin_record(out, any_tracked)) {
    std::vector<Tensor> pc = parts;
    Tensor oc = out;
    g_active_tape->record([pc, oc, m, total]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      std::size_t off2 = 0;
      for (Tensor& p : pc) {
        const std::size_t c = p.cols();
        if (tracked(p)) {
          double* gp = p.grad_buffer().data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j)
              gp[i * c + j] += g[i * total + off2 + j];
        }
        off2 += c;
      }
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  bool any_tracked = false;
  for (const Tensor& p : parts) {
    check_2d("concat_rows", p);
    if (p.cols() != n) {
      throw std::invalid_argument("concat_rows: column mismatch " +
                                  shape_str(parts[0].shape()) + " vs " +
                                  shape_str(p.shape()));
    }
    total += p.rows();
    any_tracked = any_tracked || tracked(p);
  }
  Tensor out(Shape{total, n});
  double* ov = out.value().data();
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const auto pv = p.value();
    std::copy(pv.begin(), pv.end(), ov + off);
    off += pv.size();
  }
  if (begin_record(out, any_tracked)) {
    std::vector<Tensor> pc = parts;
    Tensor oc = out;
    g_active_tape->record([pc, oc]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      std::size_t off2 = 0;
      for (Tensor& p : pc) {
        const std::size_t sz = p.numel();
        if (tracked(p)) {
          double* gp = p.grad_buffer().data();
          for (std::size_t i = 0; i < sz; ++i) gp[i] += g[off2 + i];
        }
        off2 += sz;
      }
    });
  }
  return out;
}

Tensor row(const Tensor& x, std::size_t r) { return rows(x, r, 1); }

Tensor rows(const Tensor& x, std::size_t first, std::size_t count) {
  check_2d("rows", x);
  if (first + count > x.rows() || count == 0) {
    throw std::invalid_argument("rows: range [" + std::to_string(first) + ", " +
                                std::to_string(first + count) +
                                ") out of bounds for " + shape_str(x.shape()));
  }
  const std::size_t n = x.cols();
  Tensor out(Shape{count, n});
  const double* xv = x.value().data();
  std::copy(xv + first * n, xv + (first + count) * n, out.value().data());
  if (begin_record(out, tracked(x))) {
    Tensor xc = x, oc = out;
    g_active_tape->record([xc, oc, first, count, n]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      double* gx = xc.grad_buffer().data();
      for (std::size_t i = 0; i < count * n; ++i) gx[first * n + i] += g[i];
    });
  }
  return out;
}

Tensor cols(const Tensor& x, std::size_t first, std::size_t count) {
  check_2d("cols", x);
  if (first + count > x.cols() || count == 0) {
    throw std::invalid_argument("cols: range [" + std::to_string(first) + ", " +
                                std::to_string(first + count) +
                                ") out of bounds for " + shape_str(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out(Shape{m, count});
  const double* xv = x.value().data();
  double* ov = out.value().data();
  for (std::size_t i = 0; i < m; ++i)
    std::copy(xv + i * n + first, xv + i * n + first + count, ov + i * count);
  if (begin_record(out, tracked(x))) {
    Tensor xc = x, oc = out;
    g_active_tape->record([xc, oc, first, count, m, n]() mutable {
      if (!oc.has_grad()) return;
      const double* g = oc.grad().data();
      double* gx = xc.grad_buffer().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j)
          gx[i * n + first + j] += g[i * count + j];
    });
  }
  return out;
}

}  // namespace decoar
