#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "distlab/errors.hpp"

namespace distlab {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
size_t shape_numel(const Shape& s);

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until backward touches this tensor
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major tensor of 64-bit floats. Copying a Tensor aliases the
/// same storage; clone() makes an independent copy. Gradients live next to
/// the values and are filled in by Tape::backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  int dim(int i) const { return d_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(d_->shape.size()); }
  size_t numel() const { return d_->value.size(); }

  double* data() { return d_->value.data(); }
  const double* data() const { return d_->value.data(); }
  std::vector<double>& values() { return d_->value; }
  const std::vector<double>& values() const { return d_->value; }

  /// Value of a one-element tensor.
  double item() const;

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool b) { d_->requires_grad = b; }

  bool has_grad() const { return !d_->grad.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  /// Allocates the gradient buffer (zeros) if absent.
  void ensure_grad();
  /// Drops the gradient buffer.
  void clear_grad() { d_->grad.clear(); }

  /// Deep copy; gradient buffer is not copied.
  Tensor clone() const;
  /// Copy of the values that takes no gradient (knowledge-source contract).
  Tensor detach() const;

  bool same_storage(const Tensor& o) const { return d_ == o.d_; }
  bool all_finite() const;

 private:
  std::shared_ptr<detail::TensorData> d_;
};

/// Append-only record of differentiable operations. Every op that sees a
/// non-null tape and at least one grad-taking operand pushes one backward
/// rule; nodes are therefore in topological order by construction and
/// backward() visits each exactly once, in reverse. A tape can be walked
/// once; a second backward on a spent tape is a contract violation.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_rule);
  size_t size() const { return nodes_.size(); }
  bool spent() const { return spent_; }

  /// Seeds d(loss)/d(loss) = 1 and runs all recorded rules in reverse.
  /// Gradients accumulate additively across multiple uses of a tensor.
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> nodes_;
  bool spent_ = false;
};

// ---------------------------------------------------------------------------
// Operations. Each takes the tape to record on; pass nullptr to run
// forward-only (outputs then take no gradient).
// ---------------------------------------------------------------------------

// elementwise, identical shapes
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double c);

// x: [..., n] plus bias [n], broadcast over leading dims
Tensor add_bias(Tape* tape, const Tensor& x, const Tensor& bias);

Tensor relu(Tape* tape, const Tensor& x);
Tensor tanh(Tape* tape, const Tensor& x);
Tensor sigmoid(Tape* tape, const Tensor& x);

/// Concatenate along the last axis; all leading dims must agree.
Tensor concat_last(Tape* tape, const std::vector<Tensor>& xs);

/// Mean of all elements, as a [1] tensor.
Tensor mean(Tape* tape, const Tensor& x);

/// a: [m,k] times b: [k,n] -> [m,n].
/// Backward: dA += dC.B^T, dB += A^T.dC.
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);

/// Valid 1-d convolution over the sequence axis.
/// input: [batch, seq, emb], kernel: [channels, width, emb], bias: [channels]
/// -> [batch, seq-width+1, channels]. Throws SequenceError when seq < width.
Tensor conv1d(Tape* tape, const Tensor& input, const Tensor& kernel,
              const Tensor& bias);

/// Per-channel max across positions: [batch, positions, channels] ->
/// [batch, channels]. Gradient goes to the first argmax on ties.
Tensor max_over_time(Tape* tape, const Tensor& input);

/// Row-wise embedding gather: table [vocab, emb], ids laid out [rows, cols]
/// -> [rows, cols, emb]. Gradient scatter-adds into the table.
Tensor embedding(Tape* tape, const Tensor& table, const std::vector<int>& ids,
                 int rows, int cols);

/// x: [batch, seq, emb] -> the slice at time t, [batch, emb].
Tensor select_time(Tape* tape, const Tensor& x, int t);

struct LstmParams {
  Tensor w_xi, w_hi, b_i;  // input gate
  Tensor w_xf, w_hf, b_f;  // forget gate
  Tensor w_xg, w_hg, b_g;  // candidate
  Tensor w_xo, w_ho, b_o;  // output gate
};

/// One LSTM step. x_t: [batch, in], h_prev/c_prev: [batch, hidden].
/// i,f,o = sigmoid, g = tanh; c_t = f*c_prev + i*g; h_t = o*tanh(c_t).
std::pair<Tensor, Tensor> lstm_cell(Tape* tape, const Tensor& x_t,
                                    const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmParams& p);

/// Row-wise softmax with max-subtraction: [batch, classes] (classes >= 2).
Tensor softmax(Tape* tape, const Tensor& logits);

/// Mean over the batch of -log(prob of true class); probabilities are
/// clamped at 1e-12 before the log. probs: [batch, classes].
Tensor cross_entropy(Tape* tape, const Tensor& probs,
                     const std::vector<int>& labels);

/// Mean squared difference, as a [1] tensor. A detached second argument
/// receives no gradient.
Tensor mse(Tape* tape, const Tensor& pred_a, const Tensor& pred_b);

/// Max relative error between the analytic gradient of f at `input` and
/// central finite differences with step eps:
///   max_i |analytic_i - numeric_i| / max(1e-8, |analytic_i| + |numeric_i|)
/// f must be scalar-valued (numel 1).
double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                  const Tensor& input, double eps = 1e-5);

/// Runs grad_check for every exported op at 5 random small shapes each,
/// writing one line per op. Returns true when every max error is < 1e-4.
bool run_gradcheck_suite(std::ostream& out, uint64_t seed = 20240901ULL);

}  // namespace distlab
