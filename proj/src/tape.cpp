#include "tape.hpp"

#include <cmath>

namespace gmnmlab {

namespace {

void require_rowvec(const Tensor& a, const Tensor& v, const char* who) {
  if (a.rank() != 2 || v.size() != a.dim(1))
    throw ShapeError(std::string(who) + ": need [r,c] and vector of length c");
}

void require_colvec(const Tensor& a, const Tensor& u, const char* who) {
  if (a.rank() != 2 || u.size() != a.dim(0))
    throw ShapeError(std::string(who) + ": need [r,c] and vector of length r");
}

}  // namespace

int Tape::push(Node n, const char* opname) {
  const int id = static_cast<int>(nodes_.size());
  throw_if_not_finite(n.val, opname, id);
  nodes_.push_back(std::move(n));
  return id;
}

int Tape::input(Tensor v, bool trainable) {
  Node n;
  n.op = Op::input;
  n.val = std::move(v);
  n.trainable = trainable;
  n.needs_grad = trainable;
  return push(std::move(n), "input");
}

#define BINARY_PRELUDE(ia, ib)                     \
  Node n;                                          \
  n.a = (ia);                                      \
  n.b = (ib);                                      \
  n.needs_grad = nodes_[(ia)].needs_grad || nodes_[(ib)].needs_grad

#define UNARY_PRELUDE(ia) \
  Node n;                 \
  n.a = (ia);             \
  n.needs_grad = nodes_[(ia)].needs_grad

int Tape::add(int a, int b) {
  BINARY_PRELUDE(a, b);
  n.op = Op::add;
  n.val = tensor_binop(BinopKind::add, nodes_[a].val, nodes_[b].val);
  return push(std::move(n), "add");
}

int Tape::sub(int a, int b) {
  BINARY_PRELUDE(a, b);
  n.op = Op::sub;
  n.val = tensor_binop(BinopKind::sub, nodes_[a].val, nodes_[b].val);
  return push(std::move(n), "sub");
}

int Tape::mul(int a, int b) {
  BINARY_PRELUDE(a, b);
  n.op = Op::mul;
  n.val = tensor_binop(BinopKind::mul, nodes_[a].val, nodes_[b].val);
  return push(std::move(n), "mul");
}

int Tape::scale(int a, double c) {
  UNARY_PRELUDE(a);
  n.op = Op::scale;
  n.c = c;
  n.val = Tensor::uninit_like(nodes_[a].val);
  const auto src = nodes_[a].val.span();
  auto dst = n.val.span();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = c * src[i];
  return push(std::move(n), "scale");
}

int Tape::add_const(int a, double c) {
  UNARY_PRELUDE(a);
  n.op = Op::add_const;
  n.c = c;
  n.val = Tensor::uninit_like(nodes_[a].val);
  const auto src = nodes_[a].val.span();
  auto dst = n.val.span();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] + c;
  return push(std::move(n), "add_const");
}

int Tape::matmul(int a, int b) {
  BINARY_PRELUDE(a, b);
  n.op = Op::matmul;
  n.val = gmnmlab::matmul(nodes_[a].val, nodes_[b].val);
  return push(std::move(n), "matmul");
}

int Tape::matmul_nt(int a, int b) {
  BINARY_PRELUDE(a, b);
  n.op = Op::matmul_nt;
  n.val = gmnmlab::matmul_nt(nodes_[a].val, nodes_[b].val);
  return push(std::move(n), "matmul_nt");
}

int Tape::add_rowvec(int a, int v) {
  BINARY_PRELUDE(a, v);
  n.op = Op::add_rowvec;
  const Tensor& x = nodes_[a].val;
  const Tensor& w = nodes_[v].val;
  require_rowvec(x, w, "add_rowvec");
  n.val = Tensor::uninit_like(x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      n.val[i * c + j] = x[i * c + j] + w[j];
  return push(std::move(n), "add_rowvec");
}

int Tape::mul_rowvec(int a, int v) {
  BINARY_PRELUDE(a, v);
  n.op = Op::mul_rowvec;
  const Tensor& x = nodes_[a].val;
  const Tensor& w = nodes_[v].val;
  require_rowvec(x, w, "mul_rowvec");
  n.val = Tensor::uninit_like(x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      n.val[i * c + j] = x[i * c + j] * w[j];
  return push(std::move(n), "mul_rowvec");
}

int Tape::add_colvec(int a, int u) {
  BINARY_PRELUDE(a, u);
  n.op = Op::add_colvec;
  const Tensor& x = nodes_[a].val;
  const Tensor& w = nodes_[u].val;
  require_colvec(x, w, "add_colvec");
  n.val = Tensor::uninit_like(x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      n.val[i * c + j] = x[i * c + j] + w[i];
  return push(std::move(n), "add_colvec");
}

int Tape::mul_colvec(int a, int u) {
  BINARY_PRELUDE(a, u);
  n.op = Op::mul_colvec;
  const Tensor& x = nodes_[a].val;
  const Tensor& w = nodes_[u].val;
  require_colvec(x, w, "mul_colvec");
  n.val = Tensor::uninit_like(x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      n.val[i * c + j] = x[i * c + j] * w[i];
  return push(std::move(n), "mul_colvec");
}

int Tape::sum(int a) {
  UNARY_PRELUDE(a);
  n.op = Op::sum;
  n.val = Tensor::scalar(gmnmlab::sum(nodes_[a].val));
  return push(std::move(n), "sum");
}

int Tape::mean(int a) {
  const std::size_t count = nodes_[a].val.size();
  return scale(sum(a), 1.0 / static_cast<double>(count));
}

int Tape::sum_rows(int a) {
  UNARY_PRELUDE(a);
  n.op = Op::sum_rows;
  const Tensor& x = nodes_[a].val;
  if (x.rank() != 2) throw ShapeError("sum_rows: rank-2 tensor required");
  const std::size_t r = x.dim(0), c = x.dim(1);
  n.val = Tensor::uninit({r});
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += x[i * c + j];
    n.val[i] = acc;
  }
  return push(std::move(n), "sum_rows");
}

int Tape::sum_groups(int a, std::size_t group) {
  UNARY_PRELUDE(a);
  n.op = Op::sum_groups;
  n.c = static_cast<double>(group);
  const Tensor& x = nodes_[a].val;
  if (x.rank() != 2 || group == 0 || x.dim(1) % group != 0)
    throw ShapeError("sum_groups: columns must split into equal groups");
  const std::size_t r = x.dim(0), c = x.dim(1), g = c / group;
  n.val = Tensor::uninit({r, g});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < g; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < group; ++j)
        acc += x[i * c + k * group + j];
      n.val[i * g + k] = acc;
    }
  return push(std::move(n), "sum_groups");
}

namespace {
template <class F>
Tensor map_tensor(const Tensor& x, F f) {
  Tensor out = Tensor::uninit_like(x);
  const auto src = x.span();
  auto dst = out.span();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}
}  // namespace

int Tape::exp(int a) {
  UNARY_PRELUDE(a);
  n.op = Op::exp_op;
  n.val = map_tensor(nodes_[a].val, [](double x) { return std::exp(x); });
  return push(std::move(n), "exp");
}

int Tape::sin(int a) {
  UNARY_PRELUDE(a);
  n.op = Op::sin_op;
  n.val = map_tensor(nodes_[a].val, [](double x) { return std::sin(x); });
  return push(std::move(n), "sin");
}

int Tape::tanh(int a) {
  UNARY_PRELUDE(a);
  n.op = Op::tanh_op;
  n.val = map_tensor(nodes_[a].val, [](double x) { return std::tanh(x); });
  return push(std::move(n), "tanh");
}

int Tape::sigmoid(int a) {
  UNARY_PRELUDE(a);
  n.op = Op::sigmoid_op;
  n.val = map_tensor(nodes_[a].val,
                     [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return push(std::move(n), "sigmoid");
}

int Tape::square(int a) {
  UNARY_PRELUDE(a);
  n.op = Op::square;
  n.val = map_tensor(nodes_[a].val, [](double x) { return x * x; });
  return push(std::move(n), "square");
}

int Tape::relu(int a) {
  UNARY_PRELUDE(a);
  n.op = Op::relu;
  n.val = map_tensor(nodes_[a].val, [](double x) { return x > 0 ? x : 0.0; });
  return push(std::move(n), "relu");
}

int Tape::gauss_bump(int y) {
  UNARY_PRELUDE(y);
  n.op = Op::gauss_bump;
  n.val = map_tensor(nodes_[y].val,
                     [](double x) { return std::exp(-0.5 * x * x); });
  return push(std::move(n), "gauss_bump");
}

int Tape::exp_neg_half(int y) {
  UNARY_PRELUDE(y);
  n.op = Op::exp_neg_half;
  n.val =
      map_tensor(nodes_[y].val, [](double x) { return std::exp(-0.5 * x); });
  return push(std::move(n), "exp_neg_half");
}

int Tape::gauss_bump_curv(int y, int f) {
  BINARY_PRELUDE(y, f);
  n.op = Op::gauss_bump_curv;
  const Tensor& yv = nodes_[y].val;
  const Tensor& fv = nodes_[f].val;
  if (!yv.same_shape(fv))
    throw ShapeError("gauss_bump_curv: shape mismatch");
  n.val = Tensor::uninit_like(yv);
  for (std::size_t i = 0; i < yv.size(); ++i)
    n.val[i] = fv[i] * (yv[i] * yv[i] - 1.0);
  return push(std::move(n), "gauss_bump_curv");
}

int Tape::batch_vecmat(int v, int t3) {
  BINARY_PRELUDE(v, t3);
  n.op = Op::batch_vecmat;
  const Tensor& w = nodes_[v].val;   // [m,n]
  const Tensor& t = nodes_[t3].val;  // [m,n,d]
  if (t.rank() != 3 || w.rank() != 2 || w.dim(0) != t.dim(0) ||
      w.dim(1) != t.dim(1))
    throw ShapeError("batch_vecmat: need v[m,n] and T[m,n,d]");
  const std::size_t m = t.dim(0), nn = t.dim(1), d = t.dim(2);
  n.val = Tensor({m, d});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t jn = 0; jn < nn; ++jn) {
      const double wv = w[i * nn + jn];
      const double* trow = t.data() + (i * nn + jn) * d;
      double* orow = n.val.data() + i * d;
      for (std::size_t k = 0; k < d; ++k) orow[k] += wv * trow[k];
    }
  return push(std::move(n), "batch_vecmat");
}

int Tape::batch_matvec(int t3, int u) {
  BINARY_PRELUDE(t3, u);
  n.op = Op::batch_matvec;
  const Tensor& t = nodes_[t3].val;  // [m,n,d]
  const Tensor& w = nodes_[u].val;   // [m,d]
  if (t.rank() != 3 || w.rank() != 2 || w.dim(0) != t.dim(0) ||
      w.dim(1) != t.dim(2))
    throw ShapeError("batch_matvec: need T[m,n,d] and u[m,d]");
  const std::size_t m = t.dim(0), nn = t.dim(1), d = t.dim(2);
  n.val = Tensor::uninit({m, nn});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t jn = 0; jn < nn; ++jn) {
      const double* trow = t.data() + (i * nn + jn) * d;
      const double* urow = w.data() + i * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += trow[k] * urow[k];
      n.val[i * nn + jn] = acc;
    }
  return push(std::move(n), "batch_matvec");
}

int Tape::conv2d(int x, int k) {
  BINARY_PRELUDE(x, k);
  n.op = Op::conv2d;
  const Tensor& im = nodes_[x].val;  // [b,h,w,ci]
  const Tensor& kr = nodes_[k].val;  // [kh,kw,ci,co]
  if (im.rank() != 4 || kr.rank() != 4 || im.dim(3) != kr.dim(2))
    throw ShapeError("conv2d: need x[b,h,w,ci] and k[kh,kw,ci,co]");
  const std::size_t b = im.dim(0), h = im.dim(1), w = im.dim(2),
                    ci = im.dim(3);
  const std::size_t kh = kr.dim(0), kw = kr.dim(1), co = kr.dim(3);
  if (h < kh || w < kw) throw ShapeError("conv2d: spatial underflow");
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  n.val = Tensor({b, oh, ow, co});
  for (std::size_t ib = 0; ib < b; ++ib)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* orow = n.val.data() + ((ib * oh + oy) * ow + ox) * co;
        for (std::size_t ky = 0; ky < kh; ++ky)
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double* irow =
                im.data() + ((ib * h + oy + ky) * w + ox + kx) * ci;
            const double* krow = kr.data() + (ky * kw + kx) * ci * co;
            for (std::size_t c = 0; c < ci; ++c) {
              const double iv = irow[c];
              const double* kc = krow + c * co;
              for (std::size_t o = 0; o < co; ++o) orow[o] += iv * kc[o];
            }
          }
      }
  return push(std::move(n), "conv2d");
}

int Tape::add_chan(int x, int bias) {
  BINARY_PRELUDE(x, bias);
  n.op = Op::add_chan;
  const Tensor& im = nodes_[x].val;
  const Tensor& bv = nodes_[bias].val;
  if (im.rank() != 4 || bv.size() != im.dim(3))
    throw ShapeError("add_chan: need x[b,h,w,c] and bias[c]");
  n.val = Tensor::zeros_like(im);
  const std::size_t c = im.dim(3), outer = im.size() / c;
  for (std::size_t i = 0; i < outer; ++i)
    for (std::size_t j = 0; j < c; ++j)
      n.val[i * c + j] = im[i * c + j] + bv[j];
  return push(std::move(n), "add_chan");
}

int Tape::maxpool2x2(int x) {
  UNARY_PRELUDE(x);
  n.op = Op::maxpool2x2;
  const Tensor& im = nodes_[x].val;
  if (im.rank() != 4) throw ShapeError("maxpool2x2: rank-4 tensor required");
  const std::size_t b = im.dim(0), h = im.dim(1), w = im.dim(2),
                    c = im.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) throw ShapeError("maxpool2x2: spatial underflow");
  n.val = Tensor({b, oh, ow, c});
  n.aux.resize(n.val.size());
  for (std::size_t ib = 0; ib < b; ++ib)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ic = 0; ic < c; ++ic) {
          std::size_t best_idx = ((ib * h + 2 * oy) * w + 2 * ox) * c + ic;
          double best = im[best_idx];
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx =
                  ((ib * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ic;
              if (im[idx] > best) {
                best = im[idx];
                best_idx = idx;
              }
            }
          const std::size_t oidx = ((ib * oh + oy) * ow + ox) * c + ic;
          n.val[oidx] = best;
          n.aux[oidx] = static_cast<std::int32_t>(best_idx);
        }
  return push(std::move(n), "maxpool2x2");
}

int Tape::reshape(int a, std::vector<std::size_t> shape) {
  UNARY_PRELUDE(a);
  n.op = Op::reshape;
  n.val = nodes_[a].val.reshaped(std::move(shape));
  return push(std::move(n), "reshape");
}

int Tape::slice_rows(int a, std::size_t start, std::size_t count) {
  UNARY_PRELUDE(a);
  n.op = Op::slice_rows;
  const Tensor& x = nodes_[a].val;
  if (x.rank() < 1 || start + count > x.dim(0))
    throw ShapeError("slice_rows: range out of bounds");
  n.c = static_cast<double>(start);
  std::vector<std::size_t> shape = x.shape();
  shape[0] = count;
  n.val = Tensor(std::move(shape));
  const std::size_t row = x.size() / x.dim(0);
  for (std::size_t i = 0; i < count * row; ++i)
    n.val[i] = x[start * row + i];
  return push(std::move(n), "slice_rows");
}

int Tape::mse(int pred, int target) {
  if (!nodes_[pred].val.same_shape(nodes_[target].val))
    throw ShapeError("mse: shape mismatch");
  return mean(square(sub(pred, target)));
}

Tensor Tape::grad(int id) const {
  const Node& n = nodes_[id];
  if (n.adj.size() == 0) return Tensor::zeros_like(n.val);
  return n.adj;
}

namespace {

void accumulate(Tensor& dst, const Tensor& like, const double* src,
                std::size_t n) {
  if (dst.size() == 0) dst = Tensor::zeros_like(like);
  double* d = dst.data();
  for (std::size_t i = 0; i < n; ++i) d[i] += src[i];
}

}  // namespace

void Tape::backward(int root) {
  if (!nodes_[root].val.is_scalar())
    throw ShapeError("backward: root must be scalar-valued");
  for (Node& n : nodes_) n.adj = Tensor();
  nodes_[root].adj = Tensor::scalar(1.0);

  // Helper to fetch/allocate the adjoint of input `id` shaped like its value.
  auto adj_of = [&](int id) -> Tensor& {
    Node& n = nodes_[id];
    if (n.adj.size() == 0) n.adj = Tensor::zeros_like(n.val);
    return n.adj;
  };
  auto wants = [&](int id) { return id >= 0 && nodes_[id].needs_grad; };

  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.adj.size() == 0) continue;
    const Tensor& g = n.adj;
    switch (n.op) {
      case Op::input:
        break;
      case Op::add: {
        for (int side = 0; side < 2; ++side) {
          const int in = side == 0 ? n.a : n.b;
          if (!wants(in)) continue;
          Tensor& da = adj_of(in);
          if (da.size() == g.size()) {
            accumulate(da, nodes_[in].val, g.data(), g.size());
          } else {  // scalar operand: gradient is the sum of adjoints
            da[0] += gmnmlab::sum(g);
          }
        }
        break;
      }
      case Op::sub: {
        if (wants(n.a)) {
          Tensor& da = adj_of(n.a);
          if (da.size() == g.size())
            accumulate(da, nodes_[n.a].val, g.data(), g.size());
          else
            da[0] += gmnmlab::sum(g);
        }
        if (wants(n.b)) {
          Tensor& db = adj_of(n.b);
          if (db.size() == g.size()) {
            double* d = db.data();
            for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
          } else {
            db[0] -= gmnmlab::sum(g);
          }
        }
        break;
      }
      case Op::mul: {
        const Tensor& av = nodes_[n.a].val;
        const Tensor& bv = nodes_[n.b].val;
        if (wants(n.a)) {
          Tensor& da = adj_of(n.a);
          if (av.size() == g.size()) {
            double* d = da.data();
            if (bv.size() == g.size())
              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
            else
              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[0];
          } else {  // a scalar
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * bv[i];
            da[0] += acc;
          }
        }
        if (wants(n.b)) {
          Tensor& db = adj_of(n.b);
          if (bv.size() == g.size()) {
            double* d = db.data();
            if (av.size() == g.size())
              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
            else
              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[0];
          } else {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
            db[0] += acc;
          }
        }
        break;
      }
      case Op::scale: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        double* d = da.data();
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += n.c * g[i];
        break;
      }
      case Op::add_const: {
        if (wants(n.a))
          accumulate(adj_of(n.a), nodes_[n.a].val, g.data(), g.size());
        break;
      }
      case Op::matmul: {
        // y = a.b : da += g.b^T, db += a^T.g
        if (wants(n.a)) {
          Tensor t = gmnmlab::matmul_nt(g, nodes_[n.b].val);
          accumulate(adj_of(n.a), nodes_[n.a].val, t.data(), t.size());
        }
        if (wants(n.b)) {
          Tensor t = gmnmlab::matmul_tn(nodes_[n.a].val, g);
          accumulate(adj_of(n.b), nodes_[n.b].val, t.data(), t.size());
        }
        break;
      }
      case Op::matmul_nt: {
        // y = a.b^T : da += g.b, db += g^T.a
        if (wants(n.a)) {
          Tensor t = gmnmlab::matmul(g, nodes_[n.b].val);
          accumulate(adj_of(n.a), nodes_[n.a].val, t.data(), t.size());
        }
        if (wants(n.b)) {
          Tensor t = gmnmlab::matmul_tn(g, nodes_[n.a].val);
          accumulate(adj_of(n.b), nodes_[n.b].val, t.data(), t.size());
        }
        break;
      }
      case Op::add_rowvec: {
        const std::size_t r = g.dim(0), c = g.dim(1);
        if (wants(n.a))
          accumulate(adj_of(n.a), nodes_[n.a].val, g.data(), g.size());
        if (wants(n.b)) {
          Tensor& dv = adj_of(n.b);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) dv[j] += g[i * c + j];
        }
        break;
      }
      case Op::mul_rowvec: {
        const std::size_t r = g.dim(0), c = g.dim(1);
        const Tensor& av = nodes_[n.a].val;
        const Tensor& vv = nodes_[n.b].val;
        if (wants(n.a)) {
          Tensor& da = adj_of(n.a);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              da[i * c + j] += g[i * c + j] * vv[j];
        }
        if (wants(n.b)) {
          Tensor& dv = adj_of(n.b);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              dv[j] += g[i * c + j] * av[i * c + j];
        }
        break;
      }
      case Op::add_colvec: {
        const std::size_t r = g.dim(0), c = g.dim(1);
        if (wants(n.a))
          accumulate(adj_of(n.a), nodes_[n.a].val, g.data(), g.size());
        if (wants(n.b)) {
          Tensor& du = adj_of(n.b);
          for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j];
            du[i] += acc;
          }
        }
        break;
      }
      case Op::mul_colvec: {
        const std::size_t r = g.dim(0), c = g.dim(1);
        const Tensor& av = nodes_[n.a].val;
        const Tensor& uv = nodes_[n.b].val;
        if (wants(n.a)) {
          Tensor& da = adj_of(n.a);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              da[i * c + j] += g[i * c + j] * uv[i];
        }
        if (wants(n.b)) {
          Tensor& du = adj_of(n.b);
          for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j)
              acc += g[i * c + j] * av[i * c + j];
            du[i] += acc;
          }
        }
        break;
      }
      case Op::sum: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        const double gv = g[0];
        double* d = da.data();
        for (std::size_t i = 0; i < da.size(); ++i) d[i] += gv;
        break;
      }
      case Op::sum_rows: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        const std::size_t r = nodes_[n.a].val.dim(0),
                          c = nodes_[n.a].val.dim(1);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) da[i * c + j] += g[i];
        break;
      }
      case Op::sum_groups: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        const std::size_t group = static_cast<std::size_t>(n.c);
        const std::size_t r = nodes_[n.a].val.dim(0),
                          c = nodes_[n.a].val.dim(1), gcols = c / group;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t k = 0; k < gcols; ++k)
            for (std::size_t j = 0; j < group; ++j)
              da[i * c + k * group + j] += g[i * gcols + k];
        break;
      }
      case Op::exp_op: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * n.val[i];
        break;
      }
      case Op::sin_op: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        const Tensor& av = nodes_[n.a].val;
        for (std::size_t i = 0; i < g.size(); ++i)
          da[i] += g[i] * std::cos(av[i]);
        break;
      }
      case Op::tanh_op: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          da[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
        break;
      }
      case Op::sigmoid_op: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          da[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
        break;
      }
      case Op::square: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        const Tensor& av = nodes_[n.a].val;
        for (std::size_t i = 0; i < g.size(); ++i)
          da[i] += 2.0 * g[i] * av[i];
        break;
      }
      case Op::relu: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        const Tensor& av = nodes_[n.a].val;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (av[i] > 0) da[i] += g[i];
        break;
      }
      case Op::gauss_bump: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        const Tensor& yv = nodes_[n.a].val;
        for (std::size_t i = 0; i < g.size(); ++i)
          da[i] -= g[i] * yv[i] * n.val[i];
        break;
      }
      case Op::exp_neg_half: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          da[i] -= 0.5 * g[i] * n.val[i];
        break;
      }
      case Op::gauss_bump_curv: {
        const Tensor& yv = nodes_[n.a].val;
        const Tensor& fv = nodes_[n.b].val;
        if (wants(n.a)) {
          Tensor& dy = adj_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            dy[i] += 2.0 * g[i] * fv[i] * yv[i];
        }
        if (wants(n.b)) {
          Tensor& df = adj_of(n.b);
          for (std::size_t i = 0; i < g.size(); ++i)
            df[i] += g[i] * (yv[i] * yv[i] - 1.0);
        }
        break;
      }
      case Op::batch_vecmat: {
        const Tensor& vv = nodes_[n.a].val;  // [m,n]
        const Tensor& tv = nodes_[n.b].val;  // [m,n,d]
        const std::size_t m = tv.dim(0), nn = tv.dim(1), d = tv.dim(2);
        if (wants(n.a)) {
          Tensor& dv = adj_of(n.a);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t jn = 0; jn < nn; ++jn) {
              const double* trow = tv.data() + (i * nn + jn) * d;
              const double* grow = g.data() + i * d;
              double acc = 0.0;
              for (std::size_t k = 0; k < d; ++k) acc += grow[k] * trow[k];
              dv[i * nn + jn] += acc;
            }
        }
        if (wants(n.b)) {
          Tensor& dt = adj_of(n.b);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t jn = 0; jn < nn; ++jn) {
              const double wv = vv[i * nn + jn];
              const double* grow = g.data() + i * d;
              double* trow = dt.data() + (i * nn + jn) * d;
              for (std::size_t k = 0; k < d; ++k) trow[k] += wv * grow[k];
            }
        }
        break;
      }
      case Op::batch_matvec: {
        const Tensor& tv = nodes_[n.a].val;  // [m,n,d]
        const Tensor& uv = nodes_[n.b].val;  // [m,d]
        const std::size_t m = tv.dim(0), nn = tv.dim(1), d = tv.dim(2);
        if (wants(n.a)) {
          Tensor& dt = adj_of(n.a);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t jn = 0; jn < nn; ++jn) {
              const double gv = g[i * nn + jn];
              const double* urow = uv.data() + i * d;
              double* trow = dt.data() + (i * nn + jn) * d;
              for (std::size_t k = 0; k < d; ++k) trow[k] += gv * urow[k];
            }
        }
        if (wants(n.b)) {
          Tensor& du = adj_of(n.b);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t jn = 0; jn < nn; ++jn) {
              const double gv = g[i * nn + jn];
              const double* trow = tv.data() + (i * nn + jn) * d;
              double* urow = du.data() + i * d;
              for (std::size_t k = 0; k < d; ++k) urow[k] += gv * trow[k];
            }
        }
        break;
      }
      case Op::conv2d: {
        const Tensor& im = nodes_[n.a].val;
        const Tensor& kr = nodes_[n.b].val;
        const std::size_t b = im.dim(0), h = im.dim(1), w = im.dim(2),
                          ci = im.dim(3);
        const std::size_t kh = kr.dim(0), kw = kr.dim(1), co = kr.dim(3);
        const std::size_t oh = h - kh + 1, ow = w - kw + 1;
        Tensor* dx = wants(n.a) ? &adj_of(n.a) : nullptr;
        Tensor* dk = wants(n.b) ? &adj_of(n.b) : nullptr;
        for (std::size_t ib = 0; ib < b; ++ib)
          for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const double* grow = g.data() + ((ib * oh + oy) * ow + ox) * co;
              for (std::size_t ky = 0; ky < kh; ++ky)
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const std::size_t ibase =
                      ((ib * h + oy + ky) * w + ox + kx) * ci;
                  const std::size_t kbase = (ky * kw + kx) * ci * co;
                  for (std::size_t c = 0; c < ci; ++c) {
                    double acc = 0.0;
                    for (std::size_t o = 0; o < co; ++o) {
                      const double gv = grow[o];
                      if (dk)
                        (*dk)[kbase + c * co + o] += im[ibase + c] * gv;
                      acc += kr[kbase + c * co + o] * gv;
                    }
                    if (dx) (*dx)[ibase + c] += acc;
                  }
                }
            }
        break;
      }
      case Op::add_chan: {
        if (wants(n.a))
          accumulate(adj_of(n.a), nodes_[n.a].val, g.data(), g.size());
        if (wants(n.b)) {
          Tensor& db = adj_of(n.b);
          const std::size_t c = nodes_[n.a].val.dim(3),
                            outer = g.size() / c;
          for (std::size_t i = 0; i < outer; ++i)
            for (std::size_t j = 0; j < c; ++j) db[j] += g[i * c + j];
        }
        break;
      }
      case Op::maxpool2x2: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          da[static_cast<std::size_t>(n.aux[i])] += g[i];
        break;
      }
      case Op::reshape: {
        if (wants(n.a))
          accumulate(adj_of(n.a), nodes_[n.a].val, g.data(), g.size());
        break;
      }
      case Op::slice_rows: {
        if (!wants(n.a)) break;
        Tensor& da = adj_of(n.a);
        const Tensor& av = nodes_[n.a].val;
        const std::size_t row = av.size() / av.dim(0);
        const std::size_t start = static_cast<std::size_t>(n.c);
        for (std::size_t i = 0; i < g.size(); ++i)
          da[start * row + i] += g[i];
        break;
      }
    }
  }

  for (const Node& n : nodes_)
    if (n.trainable && n.adj.size() > 0)
      throw_if_not_finite(n.adj, "backward", &n - nodes_.data());
}

}  // namespace gmnmlab
