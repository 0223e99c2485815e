#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "error.hpp"

namespace gmnmlab {

// Dense row-major tensor of 64-bit floats. A tensor is a plain value: ops
// return fresh tensors, nothing is shared; copying copies the buffer.
// Scalars are tensors of size 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  Tensor(const Tensor& o);
  Tensor& operator=(const Tensor& o);
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(Tensor&&) noexcept = default;

  // Allocates without clearing; caller overwrites every element.
  static Tensor uninit(std::vector<std::size_t> shape);
  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }
  static Tensor uninit_like(const Tensor& t) { return uninit(t.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return size_; }
  bool is_scalar() const { return size_ == 1; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.get(); }
  const double* data() const { return data_.get(); }
  std::span<double> span() { return {data_.get(), size_}; }
  std::span<const double> span() const { return {data_.get(), size_}; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessors (row-major); callers must know the leading extents.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  // Reinterprets the flat buffer under a new shape of equal element count.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const;
  bool bit_equal(const Tensor& o) const;

 private:
  std::vector<std::size_t> shape_;
  std::size_t size_ = 0;
  std::unique_ptr<double[]> data_;
};

enum class BinopKind { add, sub, mul };

// Elementwise binop; shapes must match or one operand must be a scalar.
Tensor tensor_binop(BinopKind kind, const Tensor& a, const Tensor& b);

// Standard matrix product [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a x b^T with b given as [n,k]; the layout every model weight uses.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a^T x b with a given as [k,m].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

double sum(const Tensor& a);
void throw_if_not_finite(const Tensor& t, const char* op, long node_id = -1);

}  // namespace gmnmlab
