#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "distlab/rng.hpp"
#include "distlab/tensor.hpp"

using namespace distlab;

namespace {

Tensor rand_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = uniform(rng, lo, hi);
  return t;
}

}  // namespace

TEST_CASE("tensor construction enforces shape/data agreement") {
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({3, 0}), ShapeError);
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.shape() == Shape{2, 3});
}

TEST_CASE("matmul identity and hand-summed cases") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor c = matmul(nullptr, a, eye);
  CHECK(c.values() == std::vector<double>{1, 2, 3, 4});

  Tensor row = Tensor::from_data({1, 2}, {1, 1});
  Tensor col = Tensor::from_data({2, 1}, {2, 3});
  CHECK(matmul(nullptr, row, col).item() == doctest::Approx(5.0));
}

TEST_CASE("matmul rejects mismatched inner dimensions, naming both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  try {
    matmul(nullptr, a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradients match finite differences on a 3x4 * 4x2 case") {
  Rng rng(7);
  Tensor a = rand_tensor(rng, {3, 4});
  Tensor b = rand_tensor(rng, {4, 2});
  Tensor w = rand_tensor(rng, {3, 2});
  const double err_a = grad_check(
      [&](Tape& t, const Tensor& x) {
        return mean(&t, mul(&t, matmul(&t, x, b), w));
      },
      a, 1e-5);
  const double err_b = grad_check(
      [&](Tape& t, const Tensor& x) {
        return mean(&t, mul(&t, matmul(&t, a, x), w));
      },
      b, 1e-5);
  CHECK(err_a < 1e-4);
  CHECK(err_b < 1e-4);
}

TEST_CASE("conv1d zero input gives zero output") {
  Rng rng(3);
  Tensor in = Tensor::zeros({2, 6, 3});
  Tensor ker = rand_tensor(rng, {4, 2, 3});
  Tensor bias = Tensor::zeros({4});
  Tensor out = conv1d(nullptr, in, ker, bias);
  CHECK(out.shape() == Shape{2, 5, 4});
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("conv1d hand-summed window") {
  // seq=3, width=3, emb=1, one channel of ones: valid conv of [1,2,3] -> [6]
  Tensor in = Tensor::from_data({1, 3, 1}, {1, 2, 3});
  Tensor ker = Tensor::from_data({1, 3, 1}, {1, 1, 1});
  Tensor bias = Tensor::zeros({1});
  Tensor out = conv1d(nullptr, in, ker, bias);
  CHECK(out.shape() == Shape{1, 1, 1});
  CHECK(out.item() == doctest::Approx(6.0));
}

TEST_CASE("conv1d rejects sequences shorter than the kernel") {
  Tensor in = Tensor::zeros({1, 2, 3});
  Tensor ker = Tensor::zeros({1, 4, 3});
  CHECK_THROWS_AS(conv1d(nullptr, in, ker, Tensor::zeros({1})), SequenceError);
}

TEST_CASE("conv1d gradients match finite differences") {
  Rng rng(11);
  Tensor in = rand_tensor(rng, {2, 5, 3});
  Tensor ker = rand_tensor(rng, {2, 3, 3});
  Tensor bias = rand_tensor(rng, {2});
  Tensor w = rand_tensor(rng, {2, 3, 2});
  auto wrap = [&](Tape& t, Tensor x, int which) {
    Tensor i = which == 0 ? x : in;
    Tensor k = which == 1 ? x : ker;
    Tensor b = which == 2 ? x : bias;
    return mean(&t, mul(&t, conv1d(&t, i, k, b), w));
  };
  CHECK(grad_check([&](Tape& t, const Tensor& x) { return wrap(t, x, 0); },
                   in) < 1e-4);
  CHECK(grad_check([&](Tape& t, const Tensor& x) { return wrap(t, x, 1); },
                   ker) < 1e-4);
  CHECK(grad_check([&](Tape& t, const Tensor& x) { return wrap(t, x, 2); },
                   bias) < 1e-4);
}

TEST_CASE("max_over_time single position is the identity") {
  Tensor in = Tensor::from_data({1, 1, 3}, {4, -2, 7});
  CHECK(max_over_time(nullptr, in).values() == std::vector<double>{4, -2, 7});
}

TEST_CASE("max_over_time picks the per-channel max") {
  // positions x channels = [[1,5],[3,2]] -> [3,5]
  Tensor in = Tensor::from_data({1, 2, 2}, {1, 5, 3, 2});
  CHECK(max_over_time(nullptr, in).values() == std::vector<double>{3, 5});
}

TEST_CASE("max_over_time routes tie gradient to the first occurrence") {
  Tensor in = Tensor::from_data({1, 2, 1}, {2, 2});
  in.set_requires_grad(true);
  Tape tape;
  Tensor out = mean(&tape, max_over_time(&tape, in));
  tape.backward(out);
  CHECK(in.grad() == std::vector<double>{1.0, 0.0});
}

TEST_CASE("lstm_cell with zero parameters and states yields zero h") {
  const int batch = 2, in_dim = 3, hidden = 4;
  LstmParams p;
  p.w_xi = Tensor::zeros({in_dim, hidden}); p.w_hi = Tensor::zeros({hidden, hidden}); p.b_i = Tensor::zeros({hidden});
  p.w_xf = Tensor::zeros({in_dim, hidden}); p.w_hf = Tensor::zeros({hidden, hidden}); p.b_f = Tensor::zeros({hidden});
  p.w_xg = Tensor::zeros({in_dim, hidden}); p.w_hg = Tensor::zeros({hidden, hidden}); p.b_g = Tensor::zeros({hidden});
  p.w_xo = Tensor::zeros({in_dim, hidden}); p.w_ho = Tensor::zeros({hidden, hidden}); p.b_o = Tensor::zeros({hidden});
  Tensor x = Tensor::zeros({batch, in_dim});
  Tensor h = Tensor::zeros({batch, hidden});
  Tensor c = Tensor::zeros({batch, hidden});
  auto [h1, c1] = lstm_cell(nullptr, x, h, c, p);
  for (double v : h1.values()) CHECK(v == 0.0);
}

TEST_CASE("lstm_cell hidden state stays in [-1, 1] over 100 steps") {
  Rng rng(5);
  const int batch = 2, in_dim = 3, hidden = 4;
  LstmParams p;
  auto r = [&](Shape s) { return rand_tensor(rng, std::move(s), -1.5, 1.5); };
  p.w_xi = r({in_dim, hidden}); p.w_hi = r({hidden, hidden}); p.b_i = r({hidden});
  p.w_xf = r({in_dim, hidden}); p.w_hf = r({hidden, hidden}); p.b_f = r({hidden});
  p.w_xg = r({in_dim, hidden}); p.w_hg = r({hidden, hidden}); p.b_g = r({hidden});
  p.w_xo = r({in_dim, hidden}); p.w_ho = r({hidden, hidden}); p.b_o = r({hidden});
  Tensor h = Tensor::zeros({batch, hidden});
  Tensor c = Tensor::zeros({batch, hidden});
  for (int step = 0; step < 100; ++step) {
    Tensor x = rand_tensor(rng, {batch, in_dim}, -3.0, 3.0);
    auto [h1, c1] = lstm_cell(nullptr, x, h, c, p);
    h = h1;
    c = c1;
    for (double v : h.values()) {
      CHECK(std::abs(v) <= 1.0);
      CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("softmax spec cases") {
  SUBCASE("all-equal logits give the uniform distribution") {
    Tensor probs = softmax(nullptr, Tensor::from_data({1, 4}, {3, 3, 3, 3}));
    for (double v : probs.values()) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("logits [0, ln 3] give [0.25, 0.75]") {
    Tensor probs =
        softmax(nullptr, Tensor::from_data({1, 2}, {0.0, std::log(3.0)}));
    CHECK(probs.values()[0] == doctest::Approx(0.25));
    CHECK(probs.values()[1] == doctest::Approx(0.75));
  }
  SUBCASE("huge logits do not overflow") {
    Tensor probs = softmax(nullptr, Tensor::from_data({1, 2}, {1000.0, 0.0}));
    CHECK(probs.all_finite());
    CHECK(probs.values()[0] == doctest::Approx(1.0));
    CHECK(probs.values()[1] == doctest::Approx(0.0));
  }
  SUBCASE("single class is rejected") {
    CHECK_THROWS_AS(softmax(nullptr, Tensor::zeros({2, 1})), ShapeError);
  }
}

TEST_CASE("softmax rows sum to one within 1e-9 and stay in [0, 1]") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 2 + static_cast<int>(bounded(rng, 6));
    Tensor logits = rand_tensor(rng, {4, classes}, -50.0, 50.0);
    Tensor probs = softmax(nullptr, logits);
    for (int b = 0; b < 4; ++b) {
      double sum = 0.0;
      for (int c = 0; c < classes; ++c) {
        const double v = probs.values()[static_cast<size_t>(b) * classes + c];
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("cross_entropy spec cases") {
  SUBCASE("perfect one-hot prediction costs zero") {
    Tensor probs = Tensor::from_data({1, 2}, {1.0, 0.0});
    CHECK(cross_entropy(nullptr, probs, {0}).item() == doctest::Approx(0.0));
  }
  SUBCASE("uniform over 4 classes costs ln 4") {
    Tensor probs = Tensor::from_data({1, 4}, {0.25, 0.25, 0.25, 0.25});
    CHECK(cross_entropy(nullptr, probs, {2}).item() ==
          doctest::Approx(std::log(4.0)));
  }
  SUBCASE("out-of-range label is rejected") {
    Tensor probs = Tensor::from_data({1, 2}, {0.5, 0.5});
    CHECK_THROWS_AS(cross_entropy(nullptr, probs, {2}), ValueError);
  }
  SUBCASE("zero probability is clamped, not -inf") {
    Tensor probs = Tensor::from_data({1, 2}, {0.0, 1.0});
    Tensor loss = cross_entropy(nullptr, probs, {0});
    CHECK(std::isfinite(loss.item()));
    CHECK(loss.item() == doctest::Approx(-std::log(1e-12)));
  }
}

TEST_CASE("cross_entropy gradient matches finite differences") {
  Rng rng(17);
  Tensor probs = softmax(nullptr, rand_tensor(rng, {3, 4}, -1.0, 1.0));
  const std::vector<int> labels = {1, 3, 0};
  CHECK(grad_check(
            [&](Tape& t, const Tensor& x) {
              return cross_entropy(&t, x, labels);
            },
            probs) < 1e-4);
}

TEST_CASE("mse spec cases") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  SUBCASE("identical tensors cost zero") {
    CHECK(mse(nullptr, a, a.clone()).item() == 0.0);
  }
  SUBCASE("hand-computed value") {
    Tensor b = Tensor::from_data({2}, {3, 2});
    CHECK(mse(nullptr, a, b).item() == doctest::Approx(2.0));
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(mse(nullptr, a, Tensor::zeros({3})), ShapeError);
  }
}

TEST_CASE("a detached knowledge source receives no gradient") {
  Tensor a = Tensor::from_data({2}, {1.0, 4.0}, true);
  Tensor b = Tensor::from_data({2}, {2.0, 2.0}, true);
  Tensor frozen = b.detach();
  Tape tape;
  Tensor loss = mse(&tape, a, frozen);
  tape.backward(loss);
  CHECK(a.has_grad());
  CHECK_FALSE(b.has_grad());
  CHECK_FALSE(frozen.has_grad());
  // gradient of mean((a-b)^2) wrt a is 2(a-b)/n
  CHECK(a.grad()[0] == doctest::Approx(-1.0));
  CHECK(a.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("backward spec cases") {
  SUBCASE("identity chain gives dx = 1") {
    Tensor x = Tensor::scalar(5.0, true);
    Tape tape;
    Tensor y = scale(&tape, x, 1.0);
    tape.backward(y);
    CHECK(x.grad()[0] == doctest::Approx(1.0));
  }
  SUBCASE("y = x^2 at x = 3 gives dx = 6") {
    Tensor x = Tensor::scalar(3.0, true);
    Tape tape;
    Tensor y = mul(&tape, x, x);
    tape.backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
  }
  SUBCASE("shared subexpression accumulates: y = x + x gives dx = 2") {
    Tensor x = Tensor::scalar(1.5, true);
    Tape tape;
    Tensor y = add(&tape, x, x);
    tape.backward(y);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
  }
  SUBCASE("non-scalar loss is a contract violation") {
    Tensor x = Tensor::zeros({2}, true);
    Tape tape;
    Tensor y = scale(&tape, x, 2.0);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
  SUBCASE("a second backward on a spent tape is rejected") {
    Tensor x = Tensor::scalar(2.0, true);
    Tape tape;
    Tensor y = mul(&tape, x, x);
    tape.backward(y);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
}

TEST_CASE("gradients flow through an unused branch as zeros, not errors") {
  // y depends on x only through one of two recorded ops
  Tensor x = Tensor::scalar(2.0, true);
  Tape tape;
  Tensor used = mul(&tape, x, x);
  Tensor unused = scale(&tape, x, 10.0);
  (void)unused;
  tape.backward(used);
  CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("embedding gathers rows and scatter-adds gradients") {
  Tensor table = Tensor::from_data({3, 2}, {0, 1, 10, 11, 20, 21}, true);
  const std::vector<int> ids = {2, 0, 2};
  Tensor out = embedding(nullptr, table, ids, 1, 3);
  CHECK(out.values() == std::vector<double>{20, 21, 0, 1, 20, 21});

  Tape tape;
  Tensor out2 = embedding(&tape, table, ids, 1, 3);
  tape.backward(mean(&tape, out2));
  // row 2 used twice: grad 2/6 per element; row 0 once: 1/6; row 1 never
  CHECK(table.grad()[0] == doctest::Approx(1.0 / 6));
  CHECK(table.grad()[2] == doctest::Approx(0.0));
  CHECK(table.grad()[4] == doctest::Approx(2.0 / 6));

  CHECK_THROWS_AS(embedding(nullptr, table, {3}, 1, 1), ValueError);
  CHECK_THROWS_AS(embedding(nullptr, table, {-1}, 1, 1), ValueError);
}

TEST_CASE("select_time slices one step and rejects out-of-range steps") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  CHECK(select_time(nullptr, x, 1).values() == std::vector<double>{3, 4});
  CHECK_THROWS_AS(select_time(nullptr, x, 2), ValueError);
}

TEST_CASE("elementwise helpers follow their definitions") {
  Tensor a = Tensor::from_data({3}, {-1, 0, 2});
  CHECK(relu(nullptr, a).values() == std::vector<double>{0, 0, 2});
  CHECK(tanh(nullptr, Tensor::zeros({2})).values() ==
        std::vector<double>{0, 0});
  CHECK(sigmoid(nullptr, Tensor::zeros({2})).values()[0] ==
        doctest::Approx(0.5));
  CHECK(sigmoid(nullptr, Tensor::from_data({1}, {-800.0})).all_finite());

  Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor bias = Tensor::from_data({2}, {10, 20});
  CHECK(add_bias(nullptr, x, bias).values() ==
        std::vector<double>{11, 22, 13, 24});
  CHECK_THROWS_AS(add_bias(nullptr, x, Tensor::zeros({3})), ShapeError);

  Tensor c = concat_last(nullptr, {x, Tensor::from_data({2, 1}, {7, 8})});
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c.values() == std::vector<double>{1, 2, 7, 3, 4, 8});

  CHECK(mean(nullptr, Tensor::from_data({4}, {1, 2, 3, 6})).item() ==
        doctest::Approx(3.0));
}

TEST_CASE("grad_check is exact for linear functions") {
  Rng rng(23);
  Tensor x = rand_tensor(rng, {3, 2});
  const double err = grad_check(
      [](Tape& t, const Tensor& v) { return mean(&t, scale(&t, v, 3.0)); }, x);
  CHECK(err < 1e-10);
}

namespace {

// test fixture: forward x^2 with a deliberately wrong backward rule (3x)
Tensor bad_square(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (size_t i = 0; i < x.numel(); ++i) {
    out.data()[i] = x.data()[i] * x.data()[i];
  }
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    Tensor xc = x;
    tape->record([xc, out]() mutable {
      if (!out.has_grad()) return;
      xc.ensure_grad();
      for (size_t i = 0; i < xc.numel(); ++i) {
        xc.grad()[i] += out.grad()[i] * 3.0 * xc.data()[i];
      }
    });
  }
  return out;
}

}  // namespace

TEST_CASE("grad_check flags a deliberately wrong backward rule") {
  Rng rng(29);
  Tensor x = rand_tensor(rng, {4}, 0.5, 1.5);
  const double err = grad_check(
      [](Tape& t, const Tensor& v) { return mean(&t, bad_square(&t, v)); }, x);
  CHECK(err > 1e-2);
}

TEST_CASE("the full gradient-check suite passes") {
  std::ostringstream log;
  const bool ok = run_gradcheck_suite(log);
  INFO(log.str());
  CHECK(ok);
}

TEST_CASE("forward and backward replay bit-identically") {
  auto run_once = [] {
    Rng rng(31);
    Tensor a = rand_tensor(rng, {4, 3}, -1, 1);
    Tensor b = rand_tensor(rng, {3, 2}, -1, 1);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    Tape tape;
    Tensor probs = softmax(&tape, matmul(&tape, a, b));
    Tensor loss = cross_entropy(&tape, probs, {0, 1, 0, 1});
    tape.backward(loss);
    std::vector<double> out = probs.values();
    out.insert(out.end(), a.grad().begin(), a.grad().end());
    out.insert(out.end(), b.grad().begin(), b.grad().end());
    out.push_back(loss.item());
    return out;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("finite inputs never produce non-finite outputs") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor logits = rand_tensor(rng, {3, 4}, -700.0, 700.0);
    Tensor probs = softmax(nullptr, logits);
    CHECK(probs.all_finite());
    Tensor loss = cross_entropy(nullptr, probs, {0, 1, 2});
    CHECK(loss.all_finite());
    Tensor m = mse(nullptr, probs, softmax(nullptr, rand_tensor(rng, {3, 4},
                                                                -700.0,
                                                                700.0)));
    CHECK(m.all_finite());
  }
}
