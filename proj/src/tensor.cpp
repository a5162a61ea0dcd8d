#include "distlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>

#ifdef DISTLAB_USE_CBLAS
#include <cblas.h>

#include <cstdlib>
#endif

namespace distlab {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ']';
  return os.str();
}

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(s));
    n *= static_cast<size_t>(d);
  }
  return n;
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  Tensor t;
  t.d_ = std::make_shared<detail::TensorData>();
  t.d_->value.assign(shape_numel(shape), v);
  t.d_->shape = std::move(shape);
  t.d_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " wants " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  Tensor t;
  t.d_ = std::make_shared<detail::TensorData>();
  t.d_->shape = std::move(shape);
  t.d_->value = std::move(data);
  t.d_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  }
  return d_->value[0];
}

std::vector<double>& Tensor::grad() {
  if (!has_grad()) throw ContractError("gradient not populated");
  return d_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw ContractError("gradient not populated");
  return d_->grad;
}

void Tensor::ensure_grad() {
  if (d_->grad.empty()) d_->grad.assign(d_->value.size(), 0.0);
}

Tensor Tensor::clone() const {
  return from_data(d_->shape, d_->value, d_->requires_grad);
}

Tensor Tensor::detach() const { return from_data(d_->shape, d_->value, false); }

bool Tensor::all_finite() const {
  for (double v : d_->value) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

void Tape::record(std::function<void()> backward_rule) {
  if (spent_) throw ContractError("recording onto a spent tape");
  nodes_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
  if (spent_) throw ContractError("second backward on a spent tape");
  if (loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        shape_str(loss.shape()));
  }
  spent_ = true;
  Tensor seed = loss;  // aliases the same storage
  seed.ensure_grad();
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// op helpers
// ---------------------------------------------------------------------------

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

bool wants_tape(Tape* tape, std::initializer_list<const Tensor*> ins) {
  if (!tape) return false;
  for (const Tensor* t : ins) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// out = f(x) elementwise with df given the (x, y) pair
template <typename F, typename DF>
Tensor unary_op(Tape* tape, const Tensor& x, F f, DF df) {
  Tensor out = Tensor::zeros(x.shape());
  const size_t n = x.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = f(x.data()[i]);
  if (wants_tape(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x;
    tape->record([xc, out, df]() mutable {
      if (!out.has_grad()) return;
      xc.ensure_grad();
      const size_t n = xc.numel();
      for (size_t i = 0; i < n; ++i) {
        xc.grad()[i] += out.grad()[i] * df(xc.data()[i], out.data()[i]);
      }
    });
  }
  return out;
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          const double* b, double beta, double* c) {
#ifdef DISTLAB_USE_CBLAS
  // reads OPENBLAS_NUM_THREADS on first use; pin before that happens so
  // reductions stay order-stable
  static std::once_flag once;
  std::call_once(once, [] { setenv("OPENBLAS_NUM_THREADS", "1", 0); });
  const int lda = trans_a ? m : k;
  const int ldb = trans_b ? k : n;
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a, lda, b,
              ldb, beta, c, n);
#else
  if (beta == 0.0) std::fill(c, c + static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = trans_a ? a[static_cast<size_t>(p) * m + i]
                                : a[static_cast<size_t>(i) * k + p];
      const double* brow = trans_b ? nullptr : b + static_cast<size_t>(p) * n;
      double* crow = c + static_cast<size_t>(i) * n;
      if (trans_b) {
        for (int j = 0; j < n; ++j) {
          crow[j] += av * b[static_cast<size_t>(j) * k + p];
        }
      } else {
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
#endif
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (wants_tape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b;
    tape->record([ac, bc, out]() mutable {
      if (!out.has_grad()) return;
      const size_t n = out.numel();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        for (size_t i = 0; i < n; ++i) ac.grad()[i] += out.grad()[i];
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        for (size_t i = 0; i < n; ++i) bc.grad()[i] += out.grad()[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (wants_tape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b;
    tape->record([ac, bc, out]() mutable {
      if (!out.has_grad()) return;
      const size_t n = out.numel();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        for (size_t i = 0; i < n; ++i) ac.grad()[i] += out.grad()[i];
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        for (size_t i = 0; i < n; ++i) bc.grad()[i] -= out.grad()[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (wants_tape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b;
    tape->record([ac, bc, out]() mutable {
      if (!out.has_grad()) return;
      const size_t n = out.numel();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        for (size_t i = 0; i < n; ++i) {
          ac.grad()[i] += out.grad()[i] * bc.data()[i];
        }
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        for (size_t i = 0; i < n; ++i) {
          bc.grad()[i] += out.grad()[i] * ac.data()[i];
        }
      }
    });
  }
  return out;
}

Tensor scale(Tape* tape, const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
  if (wants_tape(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor ac = a;
    tape->record([ac, out, c]() mutable {
      if (!out.has_grad()) return;
      ac.ensure_grad();
      const size_t n = out.numel();
      for (size_t i = 0; i < n; ++i) ac.grad()[i] += out.grad()[i] * c;
    });
  }
  return out;
}

Tensor add_bias(Tape* tape, const Tensor& x, const Tensor& bias) {
  if (bias.ndim() != 1 || x.dim(x.ndim() - 1) != bias.dim(0)) {
    throw ShapeError("add_bias: shape " + shape_str(x.shape()) + " vs " +
                     shape_str(bias.shape()));
  }
  const size_t n = x.numel();
  const size_t w = bias.numel();
  Tensor out = Tensor::zeros(x.shape());
  for (size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] + bias.data()[i % w];
  if (wants_tape(tape, {&x, &bias})) {
    out.set_requires_grad(true);
    Tensor xc = x, bc = bias;
    tape->record([xc, bc, out]() mutable {
      if (!out.has_grad()) return;
      const size_t n = out.numel();
      const size_t w = bc.numel();
      if (xc.requires_grad()) {
        xc.ensure_grad();
        for (size_t i = 0; i < n; ++i) xc.grad()[i] += out.grad()[i];
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        for (size_t i = 0; i < n; ++i) bc.grad()[i % w] += out.grad()[i];
      }
    });
  }
  return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
  return unary_op(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(Tape* tape, const Tensor& x) {
  return unary_op(
      tape, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Tape* tape, const Tensor& x) {
  // evaluate from the negative side so exp never overflows
  auto sig = [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return unary_op(tape, x, sig,
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor concat_last(Tape* tape, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_last: no inputs");
  Shape lead = xs[0].shape();
  lead.pop_back();
  int total = 0;
  for (const Tensor& x : xs) {
    Shape l = x.shape();
    const int last = l.back();
    l.pop_back();
    if (l != lead) {
      throw ShapeError("concat_last: shape " + shape_str(xs[0].shape()) +
                       " vs " + shape_str(x.shape()));
    }
    total += last;
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out = Tensor::zeros(out_shape);

  const size_t rows = shape_numel(lead.empty() ? Shape{1} : lead);
  size_t col_off = 0;
  for (const Tensor& x : xs) {
    const size_t w = static_cast<size_t>(x.shape().back());
    for (size_t r = 0; r < rows; ++r) {
      std::memcpy(out.data() + r * total + col_off, x.data() + r * w,
                  w * sizeof(double));
    }
    col_off += w;
  }

  bool needs = tape != nullptr;
  if (needs) {
    needs = false;
    for (const Tensor& x : xs) needs = needs || x.requires_grad();
  }
  if (needs) {
    out.set_requires_grad(true);
    std::vector<Tensor> ins = xs;
    tape->record([ins, out, rows, total]() mutable {
      if (!out.has_grad()) return;
      size_t col_off = 0;
      for (Tensor& x : ins) {
        const size_t w = static_cast<size_t>(x.shape().back());
        if (x.requires_grad()) {
          x.ensure_grad();
          for (size_t r = 0; r < rows; ++r) {
            for (size_t j = 0; j < w; ++j) {
              x.grad()[r * w + j] +=
                  out.grad()[r * static_cast<size_t>(total) + col_off + j];
            }
          }
        }
        col_off += w;
      }
    });
  }
  return out;
}

Tensor mean(Tape* tape, const Tensor& x) {
  const size_t n = x.numel();
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += x.data()[i];
  Tensor out = Tensor::scalar(s / static_cast<double>(n));
  if (wants_tape(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x;
    tape->record([xc, out, n]() mutable {
      if (!out.has_grad()) return;
      xc.ensure_grad();
      const double g = out.grad()[0] / static_cast<double>(n);
      for (size_t i = 0; i < n; ++i) xc.grad()[i] += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shape " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  gemm(false, false, m, n, k, a.data(), b.data(), 0.0, out.data());
  if (wants_tape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b;
    tape->record([ac, bc, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      if (ac.requires_grad()) {
        ac.ensure_grad();  // dA += dC . B^T
        gemm(false, true, m, k, n, out.grad().data(), bc.data(), 1.0,
             ac.grad().data());
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();  // dB += A^T . dC
        gemm(true, false, k, n, m, ac.data(), out.grad().data(), 1.0,
             bc.grad().data());
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv1d / pooling / embedding / time slice
// ---------------------------------------------------------------------------

Tensor conv1d(Tape* tape, const Tensor& input, const Tensor& kernel,
              const Tensor& bias) {
  if (input.ndim() != 3 || kernel.ndim() != 3 ||
      input.dim(2) != kernel.dim(2)) {
    throw ShapeError("conv1d: shape " + shape_str(input.shape()) + " vs " +
                     shape_str(kernel.shape()));
  }
  const int batch = input.dim(0), seq = input.dim(1), emb = input.dim(2);
  const int channels = kernel.dim(0), width = kernel.dim(1);
  if (bias.ndim() != 1 || bias.dim(0) != channels) {
    throw ShapeError("conv1d: bias shape " + shape_str(bias.shape()) +
                     " vs channels " + std::to_string(channels));
  }
  if (seq < width) {
    throw SequenceError("conv1d: sequence length " + std::to_string(seq) +
                        " shorter than kernel width " + std::to_string(width));
  }
  const int positions = seq - width + 1;
  Tensor out = Tensor::zeros({batch, positions, channels});

  const size_t we = static_cast<size_t>(width) * emb;
  for (int b = 0; b < batch; ++b) {
    const double* in_b = input.data() + static_cast<size_t>(b) * seq * emb;
    double* out_b = out.data() + static_cast<size_t>(b) * positions * channels;
    for (int p = 0; p < positions; ++p) {
      const double* window = in_b + static_cast<size_t>(p) * emb;
      for (int c = 0; c < channels; ++c) {
        const double* ker = kernel.data() + static_cast<size_t>(c) * we;
        double s = bias.data()[c];
        for (size_t j = 0; j < we; ++j) s += window[j] * ker[j];
        out_b[static_cast<size_t>(p) * channels + c] = s;
      }
    }
  }

  if (wants_tape(tape, {&input, &kernel, &bias})) {
    out.set_requires_grad(true);
    Tensor in = input, ker = kernel, bi = bias;
    tape->record([in, ker, bi, out, batch, seq, emb, channels, width,
                  positions]() mutable {
      if (!out.has_grad()) return;
      const size_t we = static_cast<size_t>(width) * emb;
      const bool need_in = in.requires_grad();
      const bool need_ker = ker.requires_grad();
      const bool need_bias = bi.requires_grad();
      if (need_in) in.ensure_grad();
      if (need_ker) ker.ensure_grad();
      if (need_bias) bi.ensure_grad();
      for (int b = 0; b < batch; ++b) {
        const double* in_b = in.data() + static_cast<size_t>(b) * seq * emb;
        double* din_b =
            need_in ? in.grad().data() + static_cast<size_t>(b) * seq * emb
                    : nullptr;
        const double* dout_b =
            out.grad().data() + static_cast<size_t>(b) * positions * channels;
        for (int p = 0; p < positions; ++p) {
          const double* window = in_b + static_cast<size_t>(p) * emb;
          for (int c = 0; c < channels; ++c) {
            const double g = dout_b[static_cast<size_t>(p) * channels + c];
            if (g == 0.0) continue;
            if (need_bias) bi.grad()[c] += g;
            const double* kc = ker.data() + static_cast<size_t>(c) * we;
            double* dkc =
                need_ker ? ker.grad().data() + static_cast<size_t>(c) * we
                         : nullptr;
            for (size_t j = 0; j < we; ++j) {
              if (need_ker) dkc[j] += g * window[j];
              if (need_in) din_b[static_cast<size_t>(p) * emb + j] += g * kc[j];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor max_over_time(Tape* tape, const Tensor& input) {
  if (input.ndim() != 3) {
    throw ShapeError("max_over_time: want [batch, positions, channels], got " +
                     shape_str(input.shape()));
  }
  const int batch = input.dim(0), positions = input.dim(1),
            channels = input.dim(2);
  Tensor out = Tensor::zeros({batch, channels});
  std::vector<int> argmax(static_cast<size_t>(batch) * channels, 0);
  for (int b = 0; b < batch; ++b) {
    const double* in_b =
        input.data() + static_cast<size_t>(b) * positions * channels;
    for (int c = 0; c < channels; ++c) {
      double best = in_b[c];
      int best_p = 0;
      for (int p = 1; p < positions; ++p) {
        const double v = in_b[static_cast<size_t>(p) * channels + c];
        if (v > best) {  // strict: ties keep the first occurrence
          best = v;
          best_p = p;
        }
      }
      out.data()[static_cast<size_t>(b) * channels + c] = best;
      argmax[static_cast<size_t>(b) * channels + c] = best_p;
    }
  }
  if (wants_tape(tape, {&input})) {
    out.set_requires_grad(true);
    Tensor in = input;
    tape->record([in, out, argmax = std::move(argmax), batch, positions,
                  channels]() mutable {
      if (!out.has_grad()) return;
      in.ensure_grad();
      for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < channels; ++c) {
          const size_t oi = static_cast<size_t>(b) * channels + c;
          const int p = argmax[oi];
          in.grad()[(static_cast<size_t>(b) * positions + p) * channels + c] +=
              out.grad()[oi];
        }
      }
    });
  }
  return out;
}

Tensor embedding(Tape* tape, const Tensor& table, const std::vector<int>& ids,
                 int rows, int cols) {
  if (table.ndim() != 2) {
    throw ShapeError("embedding: table shape " + shape_str(table.shape()));
  }
  if (ids.size() != static_cast<size_t>(rows) * cols) {
    throw ShapeError("embedding: " + std::to_string(ids.size()) +
                     " ids for layout [" + std::to_string(rows) + ", " +
                     std::to_string(cols) + "]");
  }
  const int vocab = table.dim(0), emb = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= vocab) {
      throw ValueError("embedding: id " + std::to_string(id) +
                       " outside vocab of size " + std::to_string(vocab));
    }
  }
  Tensor out = Tensor::zeros({rows, cols, emb});
  for (size_t i = 0; i < ids.size(); ++i) {
    std::memcpy(out.data() + i * emb,
                table.data() + static_cast<size_t>(ids[i]) * emb,
                static_cast<size_t>(emb) * sizeof(double));
  }
  if (wants_tape(tape, {&table})) {
    out.set_requires_grad(true);
    Tensor tb = table;
    tape->record([tb, out, ids, emb]() mutable {
      if (!out.has_grad()) return;
      tb.ensure_grad();
      for (size_t i = 0; i < ids.size(); ++i) {
        double* dst = tb.grad().data() + static_cast<size_t>(ids[i]) * emb;
        const double* src = out.grad().data() + i * emb;
        for (int j = 0; j < emb; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor select_time(Tape* tape, const Tensor& x, int t) {
  if (x.ndim() != 3) {
    throw ShapeError("select_time: want [batch, seq, emb], got " +
                     shape_str(x.shape()));
  }
  const int batch = x.dim(0), seq = x.dim(1), emb = x.dim(2);
  if (t < 0 || t >= seq) {
    throw ValueError("select_time: t " + std::to_string(t) + " outside [0, " +
                     std::to_string(seq) + ")");
  }
  Tensor out = Tensor::zeros({batch, emb});
  for (int b = 0; b < batch; ++b) {
    std::memcpy(out.data() + static_cast<size_t>(b) * emb,
                x.data() + (static_cast<size_t>(b) * seq + t) * emb,
                static_cast<size_t>(emb) * sizeof(double));
  }
  if (wants_tape(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x;
    tape->record([xc, out, batch, seq, emb, t]() mutable {
      if (!out.has_grad()) return;
      xc.ensure_grad();
      for (int b = 0; b < batch; ++b) {
        double* dst = xc.grad().data() + (static_cast<size_t>(b) * seq + t) * emb;
        const double* src = out.grad().data() + static_cast<size_t>(b) * emb;
        for (int j = 0; j < emb; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

std::pair<Tensor, Tensor> lstm_cell(Tape* tape, const Tensor& x_t,
                                    const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmParams& p) {
  auto gate = [&](const Tensor& w_x, const Tensor& w_h, const Tensor& b) {
    return add_bias(tape, add(tape, matmul(tape, x_t, w_x),
                              matmul(tape, h_prev, w_h)),
                    b);
  };
  Tensor i = sigmoid(tape, gate(p.w_xi, p.w_hi, p.b_i));
  Tensor f = sigmoid(tape, gate(p.w_xf, p.w_hf, p.b_f));
  Tensor g = tanh(tape, gate(p.w_xg, p.w_hg, p.b_g));
  Tensor o = sigmoid(tape, gate(p.w_xo, p.w_ho, p.b_o));
  Tensor c_t = add(tape, mul(tape, f, c_prev), mul(tape, i, g));
  Tensor h_t = mul(tape, o, tanh(tape, c_t));
  return {h_t, c_t};
}

// ---------------------------------------------------------------------------
// softmax / losses
// ---------------------------------------------------------------------------

Tensor softmax(Tape* tape, const Tensor& logits) {
  if (logits.ndim() != 2 || logits.dim(1) < 2) {
    throw ShapeError("softmax: want [batch, classes>=2], got " +
                     shape_str(logits.shape()));
  }
  const int batch = logits.dim(0), classes = logits.dim(1);
  Tensor out = Tensor::zeros(logits.shape());
  for (int b = 0; b < batch; ++b) {
    const double* row = logits.data() + static_cast<size_t>(b) * classes;
    double* orow = out.data() + static_cast<size_t>(b) * classes;
    double mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) {
      orow[c] = std::exp(row[c] - mx);
      z += orow[c];
    }
    for (int c = 0; c < classes; ++c) orow[c] /= z;
  }
  if (wants_tape(tape, {&logits})) {
    out.set_requires_grad(true);
    Tensor lc = logits;
    tape->record([lc, out, batch, classes]() mutable {
      if (!out.has_grad()) return;
      lc.ensure_grad();
      for (int b = 0; b < batch; ++b) {
        const double* y = out.data() + static_cast<size_t>(b) * classes;
        const double* gy = out.grad().data() + static_cast<size_t>(b) * classes;
        double* gx = lc.grad().data() + static_cast<size_t>(b) * classes;
        double dot = 0.0;
        for (int c = 0; c < classes; ++c) dot += gy[c] * y[c];
        for (int c = 0; c < classes; ++c) gx[c] += y[c] * (gy[c] - dot);
      }
    });
  }
  return out;
}

Tensor cross_entropy(Tape* tape, const Tensor& probs,
                     const std::vector<int>& labels) {
  if (probs.ndim() != 2) {
    throw ShapeError("cross_entropy: want [batch, classes], got " +
                     shape_str(probs.shape()));
  }
  const int batch = probs.dim(0), classes = probs.dim(1);
  if (labels.size() != static_cast<size_t>(batch)) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch " + std::to_string(batch));
  }
  constexpr double kClamp = 1e-12;
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    const int lab = labels[static_cast<size_t>(b)];
    if (lab < 0 || lab >= classes) {
      throw ValueError("cross_entropy: label " + std::to_string(lab) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    total -= std::log(
        std::max(kClamp, probs.data()[static_cast<size_t>(b) * classes + lab]));
  }
  Tensor out = Tensor::scalar(total / batch);
  if (wants_tape(tape, {&probs})) {
    out.set_requires_grad(true);
    Tensor pc = probs;
    tape->record([pc, out, labels, batch, classes]() mutable {
      if (!out.has_grad()) return;
      pc.ensure_grad();
      const double g = out.grad()[0] / batch;
      for (int b = 0; b < batch; ++b) {
        const size_t idx = static_cast<size_t>(b) * classes +
                           labels[static_cast<size_t>(b)];
        const double p = pc.data()[idx];
        if (p > kClamp) pc.grad()[idx] -= g / p;  // clamped region is flat
      }
    });
  }
  return out;
}

Tensor mse(Tape* tape, const Tensor& pred_a, const Tensor& pred_b) {
  check_same_shape("mse", pred_a, pred_b);
  const size_t n = pred_a.numel();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = pred_a.data()[i] - pred_b.data()[i];
    total += d * d;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (wants_tape(tape, {&pred_a, &pred_b})) {
    out.set_requires_grad(true);
    Tensor ac = pred_a, bc = pred_b;
    tape->record([ac, bc, out, n]() mutable {
      if (!out.has_grad()) return;
      const double g = 2.0 * out.grad()[0] / static_cast<double>(n);
      if (ac.requires_grad()) {
        ac.ensure_grad();
        for (size_t i = 0; i < n; ++i) {
          ac.grad()[i] += g * (ac.data()[i] - bc.data()[i]);
        }
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        for (size_t i = 0; i < n; ++i) {
          bc.grad()[i] -= g * (ac.data()[i] - bc.data()[i]);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                  const Tensor& input, double eps) {
  Tensor x = input.clone();
  x.set_requires_grad(true);

  Tape tape;
  Tensor y = f(tape, x);
  if (y.numel() != 1) {
    throw ContractError("grad_check: f must be scalar-valued, got shape " +
                        shape_str(y.shape()));
  }
  tape.backward(y);
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) analytic = x.grad();

  auto eval = [&](const Tensor& at) {
    Tape scratch;
    return f(scratch, at).item();
  };

  double worst = 0.0;
  Tensor probe = input.clone();
  for (size_t i = 0; i < probe.numel(); ++i) {
    const double keep = probe.data()[i];
    probe.data()[i] = keep + eps;
    const double up = eval(probe);
    probe.data()[i] = keep - eps;
    const double down = eval(probe);
    probe.data()[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom =
        std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace distlab
