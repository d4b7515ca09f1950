// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records one forward computation; backward() then fills a gradient
// for every node. Tapes are single-threaded and never shared; the matrix
// kernels underneath may use OpenMP internally without affecting results.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ser/linalg.hpp"

namespace ser::ad {

using lin::Matrix;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  // Leaf holding a value. `constant` is an alias used where the gradient is
  // not of interest; both receive gradients on backward.
  Var input(Matrix v);
  Var constant(Matrix v) { return input(std::move(v)); }

  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var slice_rows(Var a, int start, int count);
  Var slice_row(Var a, int r) { return slice_rows(a, r, 1); }
  Var relu(Var a);
  // Row-wise softmax over columns; masked key columns get zero weight and
  // zero gradient. A fully masked row is defined as the zero row.
  Var masked_softmax_rows(Var a, std::vector<uint8_t> key_mask);
  // Gathers table rows; backward scatter-adds into the table gradient.
  Var embedding_lookup(Var table, std::vector<int32_t> ids);
  Var sum(Var a);      // 1x1 sum of all entries
  Var mean_sq(Var a);  // 1x1 mean of squared entries

  const Matrix& value(Var v) const;
  double scalar_value(Var v) const;

  // Gradient of a 1x1 output w.r.t. every node. Throws on non-scalar output.
  void backward(Var scalar_output);
  const Matrix& grad(Var v) const;

  void reset();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    leaf,
    matmul,
    matmul_nt,
    add,
    sub,
    scale,
    concat_rows,
    concat_cols,
    slice_rows,
    relu,
    masked_softmax,
    embedding_lookup,
    sum,
    mean_sq,
  };

  struct Node {
    Op op = Op::leaf;
    int a = -1, b = -1;
    std::vector<int> parents;  // concat ops
    double factor = 0.0;       // scale
    int start = 0, count = 0;  // slice
    std::vector<int32_t> ids;  // embedding lookup
    std::vector<uint8_t> mask;
    Matrix val;
    Matrix grad;
  };

  int push(Node n);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  bool have_grads_ = false;
};

// Compares backward() against central finite differences of `build` at
// `points`, returning the max relative error over every coordinate of every
// input. `build` must produce a 1x1 output.
using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;
double grad_check(const BuildFn& build, const std::vector<Matrix>& points, double eps);

// Forward value of `build` at `points` (fresh tape, no backward).
double forward_value(const BuildFn& build, const std::vector<Matrix>& points);

}  // namespace ser::ad
