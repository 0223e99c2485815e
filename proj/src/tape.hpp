#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace gmnmlab {

// Reverse-mode tape, rebuilt every training step. Values are computed
// eagerly as nodes are appended (define-by-run), so the node list is in
// topological order by construction; backward walks it once in reverse.
// Every op checks its output for NaN/Inf and fails fast with the node id.
//
// Shape conventions: 2-D tensors are [rows, cols]; batches sit on rows.
// Broadcasting is limited to scalar-vs-tensor in add/sub/mul; the row/col
// vector ops below are explicit primitives, not general broadcasting.
class Tape {
 public:
  enum class Op : std::uint8_t {
    input,
    add,
    sub,
    mul,
    scale,        // c * a
    add_const,    // a + c
    matmul,       // [m,k] x [k,n]
    matmul_nt,    // [m,k] x [n,k]^T
    add_rowvec,   // [r,c] + v[c] per row
    mul_rowvec,   // [r,c] * v[c] per row
    add_colvec,   // [r,c] + u[r] per column
    mul_colvec,   // [r,c] * u[r] per column
    sum,          // all elements -> scalar
    sum_rows,     // [r,c] -> [r]
    sum_groups,   // [r, g*k] -> [r,g], summing k consecutive columns
    exp_op,
    sin_op,
    tanh_op,
    sigmoid_op,
    square,
    relu,            // max(x, 0)
    gauss_bump,      // exp(-y^2/2), the AGP nonlinearity
    exp_neg_half,    // exp(-y/2), its quadratic-mode form
    gauss_bump_curv, // f * (y^2 - 1), curvature factor of the bump
    batch_vecmat,  // v[m,n] . T[m,n,d] -> [m,d]
    batch_matvec,  // T[m,n,d] . u[m,d] -> [m,n]
    conv2d,        // x[b,h,w,ci] * k[kh,kw,ci,co], valid, stride 1
    add_chan,      // x[b,h,w,c] + bias[c]
    maxpool2x2,    // window max, floor semantics
    reshape,
    slice_rows,    // rows [start, start+count) of a [r,...] tensor
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c = 0.0;  // scale factor / added constant / group size
    Tensor val;
    Tensor adj;
    bool needs_grad = false;
    bool trainable = false;
    std::vector<std::int32_t> aux;  // maxpool argmax indices
  };

  int input(Tensor v, bool trainable = false);

  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int a, double c);
  int add_const(int a, double c);
  int matmul(int a, int b);
  int matmul_nt(int a, int b);
  int add_rowvec(int a, int v);
  int mul_rowvec(int a, int v);
  int add_colvec(int a, int u);
  int mul_colvec(int a, int u);
  int sum(int a);
  int mean(int a);  // sugar: scale(sum(a), 1/n)
  int sum_rows(int a);
  int sum_groups(int a, std::size_t group);
  int exp(int a);
  int sin(int a);
  int tanh(int a);
  int sigmoid(int a);
  int square(int a);
  int relu(int a);
  int gauss_bump(int y);
  int exp_neg_half(int y);
  int gauss_bump_curv(int y, int f);
  int batch_vecmat(int v, int t3);
  int batch_matvec(int t3, int u);
  int conv2d(int x, int k);
  int add_chan(int x, int bias);
  int maxpool2x2(int x);
  int reshape(int a, std::vector<std::size_t> shape);
  int slice_rows(int a, std::size_t start, std::size_t count);

  // Mean squared error between same-shape tensors; returns a scalar node.
  int mse(int pred, int target);

  // Fills adjoints for every node the root depends on. Root must be scalar.
  void backward(int root);

  const Tensor& value(int id) const { return nodes_[id].val; }
  // Gradient of the last backward() root w.r.t. node `id`. Zero tensor if
  // the node did not participate.
  Tensor grad(int id) const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[id]; }

 private:
  int push(Node n, const char* opname);
  std::vector<Node> nodes_;
};

}  // namespace gmnmlab
