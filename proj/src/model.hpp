#pragma once

#include <span>
#include <string>
#include <vector>

#include "hyperdual.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace gmnmlab {

struct ParamBlock {
  std::string name;
  Tensor* value = nullptr;
  bool trainable = true;
};

// A trainable network. Every model provides two evaluation routes:
//  - forward_tape builds the batched graph used for training (and, with a
//    throwaway tape, for plain evaluation), registering its parameters on
//    the tape in param_blocks() order;
//  - forward_one / forward_hd evaluate one flattened sample with plain
//    doubles or hyperduals, independent of the tape code, which is what the
//    derivative cross-checks lean on.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::string kind() const = 0;
  virtual std::vector<ParamBlock> param_blocks() = 0;
  virtual int output_dim() const = 0;
  // Shape of one sample, e.g. {2} or {28,28,1} or {10,4}.
  virtual std::vector<std::size_t> input_shape() const = 0;

  virtual int forward_tape(Tape& t, int x) = 0;
  // Ridge GMNM and tanh MLPs can also emit an input-space Laplacian node.
  virtual int forward_tape_with_laplacian(Tape& t, int x, int* lap);

  virtual std::vector<double> forward_one(std::span<const double> x) = 0;
  virtual std::vector<HyperDual> forward_hd(std::span<const HyperDual> x) = 0;

  // Laplacian of every output w.r.t. the inputs at one point. The default
  // sums hyperdual second derivatives over input axes; ridge GMNM overrides
  // with its closed form.
  virtual std::vector<double> laplacian_eval(std::span<const double> x);

  // Node ids of the parameters registered by the latest forward_tape call,
  // aligned with param_blocks().
  const std::vector<int>& tape_param_nodes() const { return tape_nodes_; }

  long param_count(bool trainable_only = true);

  // Plain batched evaluation via a throwaway tape.
  Tensor forward(const Tensor& X);

 protected:
  std::vector<int> tape_nodes_;
};

long flat_size(const std::vector<std::size_t>& shape);

}  // namespace gmnmlab
