#include "tensor.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>

namespace gmnmlab {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero extent in tensor shape");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), size_(shape_product(shape_)) {
  data_ = std::make_unique<double[]>(size_);  // value-initialized: zeros
}

Tensor Tensor::uninit(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.size_ = shape_product(t.shape_);
  t.data_.reset(new double[t.size_]);
  return t;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data) {
  shape_ = std::move(shape);
  size_ = shape_product(shape_);
  if (size_ != data.size())
    throw ShapeError("tensor data length does not match shape");
  data_.reset(new double[size_]);
  std::memcpy(data_.get(), data.data(), size_ * sizeof(double));
}

Tensor::Tensor(const Tensor& o) : shape_(o.shape_), size_(o.size_) {
  if (size_ > 0) {
    data_.reset(new double[size_]);
    std::memcpy(data_.get(), o.data_.get(), size_ * sizeof(double));
  }
}

Tensor& Tensor::operator=(const Tensor& o) {
  if (this == &o) return *this;
  shape_ = o.shape_;
  if (size_ != o.size_) {
    size_ = o.size_;
    data_.reset(size_ > 0 ? new double[size_] : nullptr);
  }
  if (size_ > 0) std::memcpy(data_.get(), o.data_.get(), size_ * sizeof(double));
  return *this;
}

Tensor Tensor::scalar(double v) {
  Tensor t = uninit({1});
  t[0] = v;
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t = uninit(std::move(shape));
  for (double& x : t.span()) x = v;
  return t;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_product(shape) != size_)
    throw ShapeError("reshape changes element count");
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

bool Tensor::all_finite() const {
  // branch-free exponent scan; vectorizes where isfinite would not
  constexpr std::uint64_t expmask = 0x7FF0000000000000ull;
  std::uint64_t bad = 0;
  const double* p = data_.get();
  for (std::size_t i = 0; i < size_; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &p[i], sizeof(bits));
    bad |= static_cast<std::uint64_t>((bits & expmask) == expmask);
  }
  return bad == 0;
}

bool Tensor::bit_equal(const Tensor& o) const {
  return shape_ == o.shape_ &&
         std::memcmp(data_.get(), o.data_.get(), size_ * sizeof(double)) == 0;
}

void throw_if_not_finite(const Tensor& t, const char* op, long node_id) {
  if (!t.all_finite()) throw NonFiniteError(op, node_id);
}

Tensor tensor_binop(BinopKind kind, const Tensor& a, const Tensor& b) {
  const Tensor* big = &a;
  const Tensor* small = &b;
  bool flipped = false;
  if (!a.same_shape(b)) {
    if (b.is_scalar()) {
      // keep defaults
    } else if (a.is_scalar()) {
      big = &b;
      small = &a;
      flipped = true;
    } else {
      throw ShapeError("binop shape mismatch");
    }
  }

  Tensor out = Tensor::uninit_like(*big);
  const std::size_t n = big->size();
  const double* p = big->data();
  double* o = out.data();

  if (big->same_shape(*small)) {
    const double* q = small->data();
    switch (kind) {
      case BinopKind::add:
        for (std::size_t i = 0; i < n; ++i) o[i] = p[i] + q[i];
        break;
      case BinopKind::sub:
        for (std::size_t i = 0; i < n; ++i) o[i] = p[i] - q[i];
        break;
      case BinopKind::mul:
        for (std::size_t i = 0; i < n; ++i) o[i] = p[i] * q[i];
        break;
    }
  } else {
    const double s = (*small)[0];
    switch (kind) {
      case BinopKind::add:
        for (std::size_t i = 0; i < n; ++i) o[i] = p[i] + s;
        break;
      case BinopKind::sub:
        if (flipped)  // scalar - tensor
          for (std::size_t i = 0; i < n; ++i) o[i] = s - p[i];
        else
          for (std::size_t i = 0; i < n; ++i) o[i] = p[i] - s;
        break;
      case BinopKind::mul:
        for (std::size_t i = 0; i < n; ++i) o[i] = p[i] * s;
        break;
    }
  }
  throw_if_not_finite(out, "tensor_binop");
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul dimension mismatch");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  // ikj order: contiguous inner loops, and each out[i,j] accumulates over
  // ascending k exactly like the textbook triple loop.
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    double* oi = out.data() + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b.data() + kk * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += av * bk[j];
    }
  }
  throw_if_not_finite(out, "matmul");
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw ShapeError("matmul_nt dimension mismatch");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor out = Tensor::uninit({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    double* oi = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
      oi[j] = acc;
    }
  }
  throw_if_not_finite(out, "matmul_nt");
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
    throw ShapeError("matmul_tn dimension mismatch");
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* ak = a.data() + kk * m;
    const double* bk = b.data() + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ak[i];
      double* oi = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += av * bk[j];
    }
  }
  throw_if_not_finite(out, "matmul_tn");
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.span()) s += x;
  return s;
}

}  // namespace gmnmlab
