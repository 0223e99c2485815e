#pragma once

// Shared finite-difference oracle for gradient tests: central differences
// with h scaled by the parameter magnitude, compared blockwise against tape
// adjoints. Lives in test code only.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace gmnmlab::testing {

struct FdReport {
  double max_rel = 0.0;   // relative error where the gradient is not tiny
  double max_abs = 0.0;   // absolute error where it is
  std::string worst_block;
};

// `build` must construct a scalar loss node from freshly registered
// trainable leaves (same order as `params`).
inline FdReport fd_check(
    const std::function<int(Tape&, std::vector<int>&)>& build,
    std::vector<Tensor>& params, double h_scale = 1e-5,
    double tiny = 1e-6) {
  FdReport rep;

  Tape t;
  std::vector<int> leaves;
  const int loss = build(t, leaves);
  t.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (int id : leaves) grads.push_back(t.grad(id));

  auto eval = [&](const std::vector<Tensor>& p) {
    Tape tt;
    std::vector<int> ll;
    std::vector<Tensor> saved = params;
    params = p;
    const int node = build(tt, ll);
    params = saved;
    return tt.value(node)[0];
  };

  for (std::size_t bi = 0; bi < params.size(); ++bi) {
    for (std::size_t i = 0; i < params[bi].size(); ++i) {
      const double x0 = params[bi][i];
      const double h = h_scale * std::max(1.0, std::abs(x0));
      std::vector<Tensor> p = params;
      p[bi][i] = x0 + h;
      const double fp = eval(p);
      p[bi][i] = x0 - h;
      const double fm = eval(p);
      const double fd = (fp - fm) / (2.0 * h);
      const double g = grads[bi][i];
      const double err = std::abs(fd - g);
      if (std::max(std::abs(fd), std::abs(g)) < tiny) {
        if (err > rep.max_abs) {
          rep.max_abs = err;
          rep.worst_block = "block " + std::to_string(bi) + " (abs)";
        }
      } else {
        const double rel = err / std::max(std::abs(fd), std::abs(g));
        if (rel > rep.max_rel) {
          rep.max_rel = rel;
          rep.worst_block = "block " + std::to_string(bi);
        }
      }
    }
  }
  return rep;
}

}  // namespace gmnmlab::testing
