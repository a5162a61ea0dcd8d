#include <cmath>
#include <iomanip>
#include <ostream>

#include "distlab/rng.hpp"
#include "distlab/tensor.hpp"

// Finite-difference sweep over every exported op. Each op is wrapped into a
// scalar function (a fixed random weighting of its output) and checked at 5
// random small shapes; multi-input ops are checked per input.

namespace distlab {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = uniform(rng, lo, hi);
  return t;
}

// keep values away from the relu kink so central differences stay valid
Tensor random_away_from_zero(Rng& rng, Shape shape, double margin = 0.05) {
  Tensor t = random_tensor(rng, std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i) {
    double& v = t.data()[i];
    if (std::abs(v) < margin) v = v < 0.0 ? v - margin : v + margin;
  }
  return t;
}

// distinct per-(batch, channel) position values so the argmax has margin
Tensor random_with_max_margin(Rng& rng, int batch, int positions,
                              int channels) {
  Tensor t = Tensor::zeros({batch, positions, channels});
  std::vector<int> order(static_cast<size_t>(positions));
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      for (int p = 0; p < positions; ++p) order[static_cast<size_t>(p)] = p;
      fisher_yates(order, rng);
      for (int p = 0; p < positions; ++p) {
        t.data()[(static_cast<size_t>(b) * positions + p) * channels + c] =
            0.2 * order[static_cast<size_t>(p)] + uniform(rng, -0.03, 0.03);
      }
    }
  }
  return t;
}

// scalar = mean(out * w) for a fixed random weighting w
Tensor reduce(Tape& tape, const Tensor& out, const Tensor& w) {
  return mean(&tape, mul(&tape, out, w));
}

int rnd_dim(Rng& rng, int lo = 2, int hi = 5) {
  return lo + static_cast<int>(bounded(rng, static_cast<uint64_t>(hi - lo + 1)));
}

struct Suite {
  std::ostream& out;
  Rng rng;
  bool ok = true;

  void report(const std::string& name, double err) {
    const bool pass = err < 1e-4;
    ok = ok && pass;
    out << (pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(22)
        << name << "  max rel err " << std::scientific << std::setprecision(3)
        << err << "\n"
        << std::defaultfloat;
  }

  template <typename MakeCase>
  void check(const std::string& name, MakeCase make_case, int trials = 5) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) worst = std::max(worst, make_case());
    report(name, worst);
  }
};

}  // namespace

bool run_gradcheck_suite(std::ostream& out, uint64_t seed) {
  Suite s{out, Rng(seed)};
  Rng& rng = s.rng;

  s.check("add", [&] {
    const int m = rnd_dim(rng), n = rnd_dim(rng);
    Tensor b = random_tensor(rng, {m, n});
    Tensor w = random_tensor(rng, {m, n});
    return grad_check(
        [&](Tape& t, const Tensor& x) { return reduce(t, add(&t, x, b), w); },
        random_tensor(rng, {m, n}));
  });

  s.check("sub", [&] {
    const int m = rnd_dim(rng), n = rnd_dim(rng);
    Tensor a = random_tensor(rng, {m, n});
    Tensor w = random_tensor(rng, {m, n});
    return grad_check(
        [&](Tape& t, const Tensor& x) { return reduce(t, sub(&t, a, x), w); },
        random_tensor(rng, {m, n}));
  });

  s.check("mul", [&] {
    const int m = rnd_dim(rng), n = rnd_dim(rng);
    Tensor b = random_tensor(rng, {m, n});
    Tensor w = random_tensor(rng, {m, n});
    return grad_check(
        [&](Tape& t, const Tensor& x) { return reduce(t, mul(&t, x, b), w); },
        random_tensor(rng, {m, n}));
  });

  s.check("scale", [&] {
    const int n = rnd_dim(rng);
    const double c = uniform(rng, -2.0, 2.0);
    Tensor w = random_tensor(rng, {n});
    return grad_check(
        [&](Tape& t, const Tensor& x) { return reduce(t, scale(&t, x, c), w); },
        random_tensor(rng, {n}));
  });

  s.check("add_bias", [&] {
    const int m = rnd_dim(rng), n = rnd_dim(rng);
    Tensor x0 = random_tensor(rng, {m, n});
    Tensor bias = random_tensor(rng, {n});
    Tensor w = random_tensor(rng, {m, n});
    const double ex = grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, add_bias(&t, x, bias), w);
        },
        x0);
    const double eb = grad_check(
        [&](Tape& t, const Tensor& b) {
          return reduce(t, add_bias(&t, x0, b), w);
        },
        bias);
    return std::max(ex, eb);
  });

  s.check("relu", [&] {
    const int m = rnd_dim(rng), n = rnd_dim(rng);
    Tensor w = random_tensor(rng, {m, n});
    return grad_check(
        [&](Tape& t, const Tensor& x) { return reduce(t, relu(&t, x), w); },
        random_away_from_zero(rng, {m, n}));
  });

  s.check("tanh", [&] {
    const int n = rnd_dim(rng);
    Tensor w = random_tensor(rng, {n});
    return grad_check(
        [&](Tape& t, const Tensor& x) { return reduce(t, tanh(&t, x), w); },
        random_tensor(rng, {n}, -2.0, 2.0));
  });

  s.check("sigmoid", [&] {
    const int n = rnd_dim(rng);
    Tensor w = random_tensor(rng, {n});
    return grad_check(
        [&](Tape& t, const Tensor& x) { return reduce(t, sigmoid(&t, x), w); },
        random_tensor(rng, {n}, -2.0, 2.0));
  });

  s.check("concat_last", [&] {
    const int m = rnd_dim(rng);
    const int n1 = rnd_dim(rng), n2 = rnd_dim(rng);
    Tensor a = random_tensor(rng, {m, n1});
    Tensor b = random_tensor(rng, {m, n2});
    Tensor w = random_tensor(rng, {m, n1 + n2});
    const double ea = grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, concat_last(&t, {x, b}), w);
        },
        a);
    const double eb = grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, concat_last(&t, {a, x}), w);
        },
        b);
    return std::max(ea, eb);
  });

  s.check("mean", [&] {
    const int m = rnd_dim(rng), n = rnd_dim(rng);
    return grad_check(
        [&](Tape& t, const Tensor& x) { return mean(&t, x); },
        random_tensor(rng, {m, n}));
  });

  s.check("matmul", [&] {
    const int m = rnd_dim(rng), k = rnd_dim(rng), n = rnd_dim(rng);
    Tensor a = random_tensor(rng, {m, k});
    Tensor b = random_tensor(rng, {k, n});
    Tensor w = random_tensor(rng, {m, n});
    const double ea = grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, matmul(&t, x, b), w);
        },
        a);
    const double eb = grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, matmul(&t, a, x), w);
        },
        b);
    return std::max(ea, eb);
  });

  s.check("conv1d", [&] {
    const int batch = rnd_dim(rng, 1, 3), width = rnd_dim(rng, 2, 3);
    const int seq = width + rnd_dim(rng, 0, 3), emb = rnd_dim(rng, 2, 4);
    const int channels = rnd_dim(rng, 1, 3);
    Tensor in = random_tensor(rng, {batch, seq, emb});
    Tensor ker = random_tensor(rng, {channels, width, emb});
    Tensor bias = random_tensor(rng, {channels});
    Tensor w = random_tensor(rng, {batch, seq - width + 1, channels});
    const double ei = grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, conv1d(&t, x, ker, bias), w);
        },
        in);
    const double ek = grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, conv1d(&t, in, x, bias), w);
        },
        ker);
    const double eb = grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, conv1d(&t, in, ker, x), w);
        },
        bias);
    return std::max({ei, ek, eb});
  });

  s.check("max_over_time", [&] {
    const int batch = rnd_dim(rng, 1, 3), positions = rnd_dim(rng, 2, 5);
    const int channels = rnd_dim(rng, 1, 3);
    Tensor w = random_tensor(rng, {batch, channels});
    return grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, max_over_time(&t, x), w);
        },
        random_with_max_margin(rng, batch, positions, channels));
  });

  s.check("embedding", [&] {
    const int vocab = rnd_dim(rng, 4, 8), emb = rnd_dim(rng, 2, 4);
    const int rows = rnd_dim(rng, 1, 3), cols = rnd_dim(rng, 2, 4);
    std::vector<int> ids(static_cast<size_t>(rows) * cols);
    for (int& id : ids) {
      id = static_cast<int>(bounded(rng, static_cast<uint64_t>(vocab)));
    }
    Tensor w = random_tensor(rng, {rows, cols, emb});
    return grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, embedding(&t, x, ids, rows, cols), w);
        },
        random_tensor(rng, {vocab, emb}));
  });

  s.check("select_time", [&] {
    const int batch = rnd_dim(rng, 1, 3), seq = rnd_dim(rng, 2, 5);
    const int emb = rnd_dim(rng, 2, 4);
    const int t0 = static_cast<int>(bounded(rng, static_cast<uint64_t>(seq)));
    Tensor w = random_tensor(rng, {batch, emb});
    return grad_check(
        [&](Tape& t, const Tensor& x) {
          return reduce(t, select_time(&t, x, t0), w);
        },
        random_tensor(rng, {batch, seq, emb}));
  });

  s.check("lstm_cell", [&] {
    const int batch = 2, in = rnd_dim(rng, 2, 3), hidden = rnd_dim(rng, 2, 4);
    LstmParams p;
    auto wx = [&] { return random_tensor(rng, {in, hidden}, -0.8, 0.8); };
    auto wh = [&] { return random_tensor(rng, {hidden, hidden}, -0.8, 0.8); };
    auto bb = [&] { return random_tensor(rng, {hidden}, -0.5, 0.5); };
    p.w_xi = wx(); p.w_hi = wh(); p.b_i = bb();
    p.w_xf = wx(); p.w_hf = wh(); p.b_f = bb();
    p.w_xg = wx(); p.w_hg = wh(); p.b_g = bb();
    p.w_xo = wx(); p.w_ho = wh(); p.b_o = bb();
    Tensor x0 = random_tensor(rng, {batch, in});
    Tensor h0 = random_tensor(rng, {batch, hidden}, -0.5, 0.5);
    Tensor c0 = random_tensor(rng, {batch, hidden}, -0.5, 0.5);
    Tensor wh_out = random_tensor(rng, {batch, hidden});
    Tensor wc_out = random_tensor(rng, {batch, hidden});

    // scalar = weighted h_t + weighted c_t, so both outputs carry gradient
    auto run = [&](Tape& t, const LstmParams& pp, const Tensor& x,
                   const Tensor& h, const Tensor& c) {
      auto [h_t, c_t] = lstm_cell(&t, x, h, c, pp);
      return add(&t, reduce(t, h_t, wh_out), reduce(t, c_t, wc_out));
    };

    double worst = 0.0;
    auto check_param = [&](Tensor LstmParams::* field) {
      LstmParams q = p;
      worst = std::max(
          worst, grad_check(
                     [&](Tape& t, const Tensor& x) {
                       q.*field = x;
                       return run(t, q, x0, h0, c0);
                     },
                     p.*field));
    };
    check_param(&LstmParams::w_xi); check_param(&LstmParams::w_hi);
    check_param(&LstmParams::w_xf); check_param(&LstmParams::w_hf);
    check_param(&LstmParams::w_xg); check_param(&LstmParams::w_hg);
    check_param(&LstmParams::w_xo); check_param(&LstmParams::w_ho);
    check_param(&LstmParams::b_i);  check_param(&LstmParams::b_f);
    check_param(&LstmParams::b_g);  check_param(&LstmParams::b_o);
    worst = std::max(worst, grad_check(
                                [&](Tape& t, const Tensor& x) {
                                  return run(t, p, x, h0, c0);
                                },
                                x0));
    worst = std::max(worst, grad_check(
                                [&](Tape& t, const Tensor& x) {
                                  return run(t, p, x0, x, c0);
                                },
                                h0));
    worst = std::max(worst, grad_check(
                                [&](Tape& t, const Tensor& x) {
                                  return run(t, p, x0, h0, x);
                                },
                                c0));
    return worst;
  }, 3);

  s.check("softmax", [&] {
    const int batch = rnd_dim(rng, 1, 3), classes = rnd_dim(rng, 2, 5);
    Tensor w = random_tensor(rng, {batch, classes});
    return grad_check(
        [&](Tape& t, const Tensor& x) { return reduce(t, softmax(&t, x), w); },
        random_tensor(rng, {batch, classes}, -2.0, 2.0));
  });

  s.check("cross_entropy", [&] {
    const int batch = rnd_dim(rng, 1, 4), classes = rnd_dim(rng, 2, 5);
    std::vector<int> labels(static_cast<size_t>(batch));
    for (int& l : labels) {
      l = static_cast<int>(bounded(rng, static_cast<uint64_t>(classes)));
    }
    // valid rows, entries well above the log clamp
    Tensor logits = random_tensor(rng, {batch, classes}, -1.5, 1.5);
    Tensor probs = softmax(nullptr, logits);
    return grad_check(
        [&](Tape& t, const Tensor& x) {
          return cross_entropy(&t, x, labels);
        },
        probs);
  });

  s.check("mse", [&] {
    const int m = rnd_dim(rng), n = rnd_dim(rng);
    Tensor b = random_tensor(rng, {m, n});
    Tensor a = random_tensor(rng, {m, n});
    const double ea = grad_check(
        [&](Tape& t, const Tensor& x) { return mse(&t, x, b); }, a);
    const double eb = grad_check(
        [&](Tape& t, const Tensor& x) { return mse(&t, a, x); }, b);
    return std::max(ea, eb);
  });

  return s.ok;
}

}  // namespace distlab
