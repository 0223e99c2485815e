#include "model.hpp"

#include "error.hpp"

namespace gmnmlab {

long flat_size(const std::vector<std::size_t>& shape) {
  long n = 1;
  for (std::size_t d : shape) n *= static_cast<long>(d);
  return n;
}

int Model::forward_tape_with_laplacian(Tape&, int, int*) {
  throw Error(kind() + ": no tape Laplacian; use hyperdual evaluation");
}

std::vector<double> Model::laplacian_eval(std::span<const double> x) {
  std::vector<HyperDual> hx(x.size());
  std::vector<double> lap(static_cast<std::size_t>(output_dim()), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) hx[i] = HyperDual(x[i]);
    hx[k] = HyperDual::seed(x[k]);
    const std::vector<HyperDual> out = forward_hd(hx);
    for (std::size_t j = 0; j < out.size(); ++j) lap[j] += out[j].d2;
  }
  return lap;
}

long Model::param_count(bool trainable_only) {
  long n = 0;
  for (const ParamBlock& b : param_blocks())
    if (!trainable_only || b.trainable) n += static_cast<long>(b.value->size());
  return n;
}

Tensor Model::forward(const Tensor& X) {
  Tape t;
  const int x = t.input(X, false);
  const int out = forward_tape(t, x);
  return t.value(out);
}

}  // namespace gmnmlab
