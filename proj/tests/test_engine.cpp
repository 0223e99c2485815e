#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "fd_check.hpp"
#include "hyperdual.hpp"
#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

using namespace gmnmlab;
using gmnmlab::testing::fd_check;

TEST_CASE("tensor binop examples") {
  Tensor a({2}, {1, 2}), b({2}, {3, 4});
  Tensor r = tensor_binop(BinopKind::add, a, b);
  CHECK(r[0] == 4);
  CHECK(r[1] == 6);

  Tensor x({2}, {2, 3});
  Tensor z = tensor_binop(BinopKind::mul, x, Tensor::scalar(0.0));
  CHECK(z[0] == 0);
  CHECK(z[1] == 0);

  Tensor d = tensor_binop(BinopKind::sub, x, x);
  CHECK(d[0] == 0);
  CHECK(d[1] == 0);

  CHECK_THROWS_AS(tensor_binop(BinopKind::add, a, Tensor({3})), ShapeError);
}

TEST_CASE("tensor binop rejects non-finite output") {
  Tensor big = Tensor::scalar(1e308);
  CHECK_THROWS_AS(tensor_binop(BinopKind::add, big, big), NonFiniteError);
}

TEST_CASE("matmul identity and dot product") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  Tensor r = matmul(eye, m);
  CHECK(r.bit_equal(m));

  Tensor row({1, 2}, {1, 2});
  Tensor col({2, 1}, {3, 4});
  CHECK(matmul(row, col)[0] == 11);

  CHECK_THROWS_AS(matmul(m, Tensor({3, 2})), ShapeError);
}

TEST_CASE("matmul matches the naive triple loop exactly") {
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = 1 + rng.index(6), k = 1 + rng.index(6),
                      n = 1 + rng.index(6);
    Tensor a = rng.uniform_tensor({m, k}, -2, 2);
    Tensor b = rng.uniform_tensor({k, n}, -2, 2);
    Tensor fast = matmul(a, b);
    Tensor slow({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t kk = 0; kk < k; ++kk)
          slow[i * n + j] += a[i * k + kk] * b[kk * n + j];
    CHECK(fast.bit_equal(slow));
  }
}

TEST_CASE("rng determinism and shape") {
  Rng a(42), b(42);
  Tensor ta = a.uniform_tensor({2, 3}, -1, 1);
  Tensor tb = b.uniform_tensor({2, 3}, -1, 1);
  CHECK(ta.bit_equal(tb));
  CHECK(ta.size() == 6);
  CHECK_THROWS_AS(a.uniform(1.0, 1.0), Error);
}

TEST_CASE("rng sample mean obeys the law of large numbers") {
  Rng rng(7);
  const int n = 100000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += rng.uniform();
  const double mean = acc / n;
  CHECK(mean > 0.49);
  CHECK(mean < 0.51);
}

TEST_CASE("rng values stay inside [lo,hi)") {
  Rng rng(3);
  Tensor t = rng.uniform_tensor({1000}, -2.5, 1.25);
  for (double v : t.span()) {
    CHECK(v >= -2.5);
    CHECK(v < 1.25);
  }
}

TEST_CASE("backward of sum is all ones") {
  Tape t;
  const int w = t.input(Tensor({3}, {1, 2, 3}), true);
  t.backward(t.sum(w));
  const Tensor g = t.grad(w);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 1.0);
}

TEST_CASE("backward of the Gaussian bump is zero at the center") {
  Tape t;
  const int w = t.input(Tensor::scalar(0.0), true);
  const int f = t.exp(t.scale(t.square(w), -0.5));
  t.backward(f);
  CHECK(t.grad(w)[0] == 0.0);
}

TEST_CASE("backward requires a scalar root") {
  Tape t;
  const int w = t.input(Tensor({2}, {1, 2}), true);
  CHECK_THROWS_AS(t.backward(w), ShapeError);
}

TEST_CASE("adjoints accumulate over all uses") {
  Tape t;
  const int w = t.input(Tensor::scalar(3.0), true);
  const int y = t.add(t.mul(w, w), w);  // w^2 + w -> grad 2w + 1 = 7
  t.backward(y);
  CHECK(t.grad(w)[0] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("every primitive matches central finite differences") {
  Rng rng(2024);
  const double tol = 1e-5;

  auto run = [&](const char* name,
                 std::vector<std::vector<std::size_t>> shapes,
                 std::function<int(Tape&, std::vector<int>&,
                                   std::vector<Tensor>&)> make,
                 double lo = -2.0, double hi = 2.0) {
    CAPTURE(name);
    for (int point = 0; point < 20; ++point) {
      std::vector<Tensor> params;
      for (const auto& s : shapes) params.push_back(rng.uniform_tensor(s, lo, hi));
      auto rep = fd_check(
          [&](Tape& t, std::vector<int>& leaves) {
            return make(t, leaves, params);
          },
          params);
      CHECK(rep.max_rel < tol);
      CHECK(rep.max_abs < 1e-8);
    }
  };

  auto leafs = [](Tape& t, std::vector<int>& leaves,
                  std::vector<Tensor>& params) {
    std::vector<int> ids;
    for (auto& p : params) {
      ids.push_back(t.input(p, true));
      leaves.push_back(ids.back());
    }
    return ids;
  };

  run("add+scale", {{2, 3}, {2, 3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.scale(t.add(id[0], id[1]), 1.7));
      });
  run("sub scalar-broadcast", {{2, 3}, {1}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.sub(id[0], id[1])));
      });
  run("mul + add_const", {{2, 3}, {2, 3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.add_const(t.mul(id[0], id[1]), 0.3));
      });
  run("mul scalar-broadcast", {{1}, {2, 2}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.mul(id[0], id[1])));
      });
  run("matmul", {{3, 4}, {4, 2}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.matmul(id[0], id[1])));
      },
      -1.0, 1.0);
  run("matmul_nt", {{3, 4}, {2, 4}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.matmul_nt(id[0], id[1])));
      },
      -1.0, 1.0);
  run("add_rowvec/mul_rowvec", {{3, 4}, {4}, {4}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.mul_rowvec(t.add_rowvec(id[0], id[1]), id[2])));
      });
  run("add_colvec/mul_colvec", {{3, 4}, {3}, {3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.mul_colvec(t.add_colvec(id[0], id[1]), id[2])));
      });
  run("sum_rows", {{3, 4}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.sum_rows(id[0])));
      });
  run("sum_groups", {{2, 6}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.sum_groups(id[0], 3)));
      });
  run("exp", {{2, 3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.exp(id[0]));
      },
      -1.5, 1.5);
  run("sin", {{2, 3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.sin(id[0])));
      });
  run("tanh", {{2, 3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.tanh(id[0])));
      });
  run("sigmoid", {{2, 3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.sigmoid(id[0])));
      });
  run("mean of square", {{2, 5}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.mean(t.square(id[0]));
      });
  run("relu off the kink", {{2, 3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        // keep inputs away from 0 so the finite difference is valid
        for (double& v : p[0].span())
          if (std::abs(v) < 0.05) v += 0.2;
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.relu(id[0])));
      });
  run("batch_vecmat", {{3, 2}, {3, 2, 4}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.batch_vecmat(id[0], id[1])));
      },
      -1.0, 1.0);
  run("batch_matvec", {{3, 2, 4}, {3, 4}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.batch_matvec(id[0], id[1])));
      },
      -1.0, 1.0);
  run("conv2d + add_chan + maxpool", {{2, 6, 6, 2}, {3, 3, 2, 3}, {3}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        const int c = t.add_chan(t.conv2d(id[0], id[1]), id[2]);
        return t.sum(t.square(t.maxpool2x2(c)));
      },
      -0.8, 0.8);
  run("reshape", {{2, 6}},
      [&](Tape& t, std::vector<int>& l, std::vector<Tensor>& p) {
        auto id = leafs(t, l, p);
        return t.sum(t.square(t.reshape(id[0], {3, 4})));
      });
}

TEST_CASE("three-layer composite gradient vs finite differences") {
  Rng rng(5);
  for (int point = 0; point < 5; ++point) {
    std::vector<Tensor> params = {
        rng.uniform_tensor({4, 2}, -1, 1), rng.uniform_tensor({4}, -1, 1),
        rng.uniform_tensor({3, 4}, -1, 1), rng.uniform_tensor({3}, -1, 1),
        rng.uniform_tensor({1, 3}, -1, 1), rng.uniform_tensor({1}, -1, 1)};
    const Tensor x = rng.uniform_tensor({5, 2}, -1, 1);
    auto rep = fd_check(
        [&](Tape& t, std::vector<int>& leaves) {
          const int xn = t.input(x, false);
          std::vector<int> id;
          for (auto& p : params) {
            id.push_back(t.input(p, true));
            leaves.push_back(id.back());
          }
          int h = t.tanh(t.add_rowvec(t.matmul_nt(xn, id[0]), id[1]));
          h = t.sigmoid(t.add_rowvec(t.matmul_nt(h, id[2]), id[3]));
          h = t.add_rowvec(t.matmul_nt(h, id[4]), id[5]);
          return t.mean(t.square(h));
        },
        params);
    CHECK(rep.max_rel < 1e-5);
    CHECK(rep.max_abs < 1e-8);
  }
}

TEST_CASE("backward is linear in the root") {
  Rng rng(11);
  const Tensor w0 = rng.uniform_tensor({4}, -1, 1);
  const double a = 2.25, b = -0.75;

  auto grads = [&](bool combined) {
    Tape t;
    const int w = t.input(w0, true);
    const int f = t.sum(t.square(w));
    const int g = t.sum(t.exp(t.scale(w, 0.5)));
    if (combined) {
      t.backward(t.add(t.scale(f, a), t.scale(g, b)));
      return t.grad(w);
    }
    t.backward(f);
    Tensor gf = t.grad(w);
    t.backward(g);
    Tensor gg = t.grad(w);
    Tensor out({4});
    for (std::size_t i = 0; i < 4; ++i) out[i] = a * gf[i] + b * gg[i];
    return out;
  };

  const Tensor lhs = grads(true);
  const Tensor rhs = grads(false);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-12));
}

TEST_CASE("tape reports the op that produced a non-finite value") {
  Tape t;
  const int w = t.input(Tensor::scalar(1000.0), true);
  try {
    (void)t.exp(t.square(w));  // exp(1e6) overflows
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.op() == std::string("exp"));
    CHECK(e.node_id() >= 0);
  }
}

TEST_CASE("hyperdual: sine example") {
  const double pi = std::numbers::pi;
  auto f = [&](std::span<const HyperDual> x) { return sin(pi * x[0]); };
  const std::vector<double> x = {0.5};
  const auto r = hyperdual_d2(f, x, 0);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.first == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.second == doctest::Approx(-pi * pi).epsilon(1e-14));
}

TEST_CASE("hyperdual: bilinear has zero pure second derivatives") {
  auto f = [](std::span<const HyperDual> x) { return x[0] * x[1]; };
  const std::vector<double> x = {1.3, -0.7};
  for (std::size_t k = 0; k < 2; ++k) {
    const auto r = hyperdual_d2(f, x, k);
    CHECK(r.second == 0.0);
    CHECK(r.first == doctest::Approx(k == 0 ? -0.7 : 1.3).epsilon(1e-15));
  }
}

TEST_CASE("hyperdual second derivatives match second-order differences") {
  Rng rng(17);
  auto f = [](std::span<const HyperDual> x) {
    return exp(HyperDual(-0.3) * square(x[0])) * tanh(x[1]) +
           sigmoid(x[0] * x[1]);
  };
  auto fd = [&](std::vector<double> x, std::size_t k) {
    const double h = 1e-4;
    auto evald = [&](double v) {
      std::vector<HyperDual> hx = {HyperDual(x[0]), HyperDual(x[1])};
      hx[k] = HyperDual(v);
      std::vector<HyperDual> base = hx;
      return f(std::span<const HyperDual>(base)).v;
    };
    const double x0 = x[k];
    return (evald(x0 + h) - 2.0 * evald(x0) + evald(x0 - h)) / (h * h);
  };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    for (std::size_t k = 0; k < 2; ++k) {
      const auto r = hyperdual_d2(f, x, k);
      const double ref = fd(x, k);
      CHECK(r.second ==
            doctest::Approx(ref).epsilon(1e-4).scale(std::max(1.0, std::abs(ref))));
    }
  }
}
