#include "ser/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ser::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + lin::shape_str(a) +
                              " and " + lin::shape_str(b));
}

}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  have_grads_ = false;
  return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw std::out_of_range("tape: bad var id");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::input(Matrix v) {
  if (!v.all_finite()) throw std::invalid_argument("tape input: non-finite entries");
  Node n;
  n.op = Op::leaf;
  n.val = std::move(v);
  return Var{push(std::move(n))};
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& va = node(a).val;
  const Matrix& vb = node(b).val;
  if (va.cols != vb.rows) shape_error("matmul", va, vb);
  Node n;
  n.op = Op::matmul;
  n.a = a.id;
  n.b = b.id;
  n.val = Matrix(va.rows, vb.cols);
  lin::matmul(va, vb, n.val);
  return Var{push(std::move(n))};
}

Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& va = node(a).val;
  const Matrix& vb = node(b).val;
  if (va.cols != vb.cols) shape_error("matmul_nt", va, vb);
  Node n;
  n.op = Op::matmul_nt;
  n.a = a.id;
  n.b = b.id;
  n.val = Matrix(va.rows, vb.rows);
  lin::matmul_nt(va, vb, n.val);
  return Var{push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
  const Matrix& va = node(a).val;
  const Matrix& vb = node(b).val;
  if (!va.same_shape(vb)) shape_error("add", va, vb);
  Node n;
  n.op = Op::add;
  n.a = a.id;
  n.b = b.id;
  n.val = va;
  lin::add_inplace(n.val, vb);
  return Var{push(std::move(n))};
}

Var Tape::sub(Var a, Var b) {
  const Matrix& va = node(a).val;
  const Matrix& vb = node(b).val;
  if (!va.same_shape(vb)) shape_error("sub", va, vb);
  Node n;
  n.op = Op::sub;
  n.a = a.id;
  n.b = b.id;
  n.val = va;
  for (std::size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] -= vb.data[i];
  return Var{push(std::move(n))};
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::scale;
  n.a = a.id;
  n.factor = s;
  n.val = node(a).val;
  lin::scale_inplace(n.val, s);
  return Var{push(std::move(n))};
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty part list");
  int cols = node(parts[0]).val.cols;
  int rows = 0;
  for (Var p : parts) {
    const Matrix& v = node(p).val;
    if (v.cols != cols) shape_error("concat_rows", node(parts[0]).val, v);
    rows += v.rows;
  }
  Node n;
  n.op = Op::concat_rows;
  n.val = Matrix(rows, cols);
  int r = 0;
  for (Var p : parts) {
    const Matrix& v = node(p).val;
    for (int i = 0; i < v.rows; ++i)
      for (int j = 0; j < cols; ++j) n.val.at(r + i, j) = v.at(i, j);
    r += v.rows;
    n.parents.push_back(p.id);
  }
  return Var{push(std::move(n))};
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty part list");
  int rows = node(parts[0]).val.rows;
  int cols = 0;
  for (Var p : parts) {
    const Matrix& v = node(p).val;
    if (v.rows != rows) shape_error("concat_cols", node(parts[0]).val, v);
    cols += v.cols;
  }
  Node n;
  n.op = Op::concat_cols;
  n.val = Matrix(rows, cols);
  int c = 0;
  for (Var p : parts) {
    const Matrix& v = node(p).val;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < v.cols; ++j) n.val.at(i, c + j) = v.at(i, j);
    c += v.cols;
    n.parents.push_back(p.id);
  }
  return Var{push(std::move(n))};
}

Var Tape::slice_rows(Var a, int start, int count) {
  const Matrix& va = node(a).val;
  if (start < 0 || count < 1 || start + count > va.rows)
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") out of " +
                                std::to_string(va.rows) + " rows");
  Node n;
  n.op = Op::slice_rows;
  n.a = a.id;
  n.start = start;
  n.count = count;
  n.val = Matrix(count, va.cols);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < va.cols; ++j) n.val.at(i, j) = va.at(start + i, j);
  return Var{push(std::move(n))};
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::relu;
  n.a = a.id;
  n.val = node(a).val;
  for (double& v : n.val.data) v = v > 0.0 ? v : 0.0;
  return Var{push(std::move(n))};
}

Var Tape::masked_softmax_rows(Var a, std::vector<uint8_t> key_mask) {
  const Matrix& va = node(a).val;
  if (static_cast<int>(key_mask.size()) != va.cols)
    throw std::invalid_argument("masked_softmax_rows: mask length " +
                                std::to_string(key_mask.size()) + " vs " +
                                std::to_string(va.cols) + " columns");
  Node n;
  n.op = Op::masked_softmax;
  n.a = a.id;
  n.val = Matrix(va.rows, va.cols);
  for (int i = 0; i < va.rows; ++i) {
    double mx = -1.0;
    bool any = false;
    for (int j = 0; j < va.cols; ++j) {
      if (!key_mask[static_cast<std::size_t>(j)]) continue;
      if (!any || va.at(i, j) > mx) mx = va.at(i, j);
      any = true;
    }
    if (!any) continue;  // all-masked row stays zero
    double denom = 0.0;
    for (int j = 0; j < va.cols; ++j) {
      if (!key_mask[static_cast<std::size_t>(j)]) continue;
      double e = std::exp(va.at(i, j) - mx);
      n.val.at(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < va.cols; ++j)
      if (key_mask[static_cast<std::size_t>(j)]) n.val.at(i, j) /= denom;
  }
  n.mask = std::move(key_mask);
  return Var{push(std::move(n))};
}

Var Tape::embedding_lookup(Var table, std::vector<int32_t> ids) {
  const Matrix& vt = node(table).val;
  for (int32_t id : ids)
    if (id < 0 || id >= vt.rows)
      throw std::out_of_range("embedding_lookup: id " + std::to_string(id) + " out of " +
                              std::to_string(vt.rows) + " rows");
  Node n;
  n.op = Op::embedding_lookup;
  n.a = table.id;
  n.val = Matrix(static_cast<int>(ids.size()), vt.cols);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (int j = 0; j < vt.cols; ++j) n.val.at(static_cast<int>(i), j) = vt.at(ids[i], j);
  n.ids = std::move(ids);
  return Var{push(std::move(n))};
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::sum;
  n.a = a.id;
  n.val = Matrix(1, 1);
  double acc = 0.0;
  for (double v : node(a).val.data) acc += v;
  n.val.at(0, 0) = acc;
  return Var{push(std::move(n))};
}

Var Tape::mean_sq(Var a) {
  const Matrix& va = node(a).val;
  if (va.size() == 0) throw std::invalid_argument("mean_sq: empty matrix");
  Node n;
  n.op = Op::mean_sq;
  n.a = a.id;
  n.val = Matrix(1, 1);
  double acc = 0.0;
  for (double v : va.data) acc += v * v;
  n.val.at(0, 0) = acc / static_cast<double>(va.size());
  return Var{push(std::move(n))};
}

const Matrix& Tape::value(Var v) const { return node(v).val; }

double Tape::scalar_value(Var v) const {
  const Matrix& m = node(v).val;
  if (m.rows != 1 || m.cols != 1)
    throw std::invalid_argument("scalar_value: node is " + lin::shape_str(m));
  return m.at(0, 0);
}

const Matrix& Tape::grad(Var v) const {
  if (!have_grads_) throw std::logic_error("grad: backward() has not run");
  return node(v).grad;
}

void Tape::reset() {
  nodes_.clear();
  have_grads_ = false;
}

void Tape::backward(Var output) {
  const Node& out = node(output);
  if (out.val.rows != 1 || out.val.cols != 1)
    throw std::invalid_argument("backward: output is " + lin::shape_str(out.val) +
                                ", expected 1x1");

  for (Node& n : nodes_) n.grad = Matrix(n.val.rows, n.val.cols);
  nodes_[static_cast<std::size_t>(output.id)].grad.at(0, 0) = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::matmul: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        Node& pb = nodes_[static_cast<std::size_t>(n.b)];
        lin::matmul_nt(g, pb.val, pa.grad, /*accumulate=*/true);
        lin::matmul_tn(pa.val, g, pb.grad, /*accumulate=*/true);
        break;
      }
      case Op::matmul_nt: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        Node& pb = nodes_[static_cast<std::size_t>(n.b)];
        lin::matmul(g, pb.val, pa.grad, /*accumulate=*/true);
        lin::matmul_tn(g, pa.val, pb.grad, /*accumulate=*/true);
        break;
      }
      case Op::add: {
        lin::add_inplace(nodes_[static_cast<std::size_t>(n.a)].grad, g);
        lin::add_inplace(nodes_[static_cast<std::size_t>(n.b)].grad, g);
        break;
      }
      case Op::sub: {
        lin::add_inplace(nodes_[static_cast<std::size_t>(n.a)].grad, g);
        Matrix& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
        for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
        break;
      }
      case Op::scale: {
        Matrix& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += n.factor * g.data[i];
        break;
      }
      case Op::concat_rows: {
        int r = 0;
        for (int pid : n.parents) {
          Node& p = nodes_[static_cast<std::size_t>(pid)];
          for (int i = 0; i < p.val.rows; ++i)
            for (int j = 0; j < p.val.cols; ++j) p.grad.at(i, j) += g.at(r + i, j);
          r += p.val.rows;
        }
        break;
      }
      case Op::concat_cols: {
        int c = 0;
        for (int pid : n.parents) {
          Node& p = nodes_[static_cast<std::size_t>(pid)];
          for (int i = 0; i < p.val.rows; ++i)
            for (int j = 0; j < p.val.cols; ++j) p.grad.at(i, j) += g.at(i, c + j);
          c += p.val.cols;
        }
        break;
      }
      case Op::slice_rows: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        for (int i = 0; i < n.count; ++i)
          for (int j = 0; j < n.val.cols; ++j) pa.grad.at(n.start + i, j) += g.at(i, j);
        break;
      }
      case Op::relu: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        for (std::size_t i = 0; i < g.data.size(); ++i)
          if (pa.val.data[i] > 0.0) pa.grad.data[i] += g.data[i];
        break;
      }
      case Op::masked_softmax: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        const Matrix& y = n.val;
        for (int i = 0; i < y.rows; ++i) {
          double dot = 0.0;
          for (int j = 0; j < y.cols; ++j)
            if (n.mask[static_cast<std::size_t>(j)]) dot += g.at(i, j) * y.at(i, j);
          for (int j = 0; j < y.cols; ++j)
            if (n.mask[static_cast<std::size_t>(j)])
              pa.grad.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
        break;
      }
      case Op::embedding_lookup: {
        Node& pt = nodes_[static_cast<std::size_t>(n.a)];
        for (std::size_t i = 0; i < n.ids.size(); ++i)
          for (int j = 0; j < n.val.cols; ++j)
            pt.grad.at(n.ids[i], j) += g.at(static_cast<int>(i), j);
        break;
      }
      case Op::sum: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        double gs = g.at(0, 0);
        for (double& v : pa.grad.data) v += gs;
        break;
      }
      case Op::mean_sq: {
        Node& pa = nodes_[static_cast<std::size_t>(n.a)];
        double gs = g.at(0, 0) * 2.0 / static_cast<double>(pa.val.size());
        for (std::size_t i = 0; i < pa.val.data.size(); ++i)
          pa.grad.data[i] += gs * pa.val.data[i];
        break;
      }
    }
  }
  have_grads_ = true;
}

double forward_value(const BuildFn& build, const std::vector<Matrix>& points) {
  Tape t;
  std::vector<Var> vars;
  vars.reserve(points.size());
  for (const Matrix& p : points) vars.push_back(t.input(p));
  Var out = build(t, vars);
  return t.scalar_value(out);
}

double grad_check(const BuildFn& build, const std::vector<Matrix>& points, double eps) {
  Tape t;
  std::vector<Var> vars;
  vars.reserve(points.size());
  for (const Matrix& p : points) vars.push_back(t.input(p));
  Var out = build(t, vars);
  t.backward(out);

  std::vector<Matrix> analytic;
  analytic.reserve(points.size());
  for (Var v : vars) analytic.push_back(t.grad(v));

  double max_rel = 0.0;
  std::vector<Matrix> work = points;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t c = 0; c < points[i].data.size(); ++c) {
      double orig = work[i].data[c];
      work[i].data[c] = orig + eps;
      double up = forward_value(build, work);
      work[i].data[c] = orig - eps;
      double dn = forward_value(build, work);
      work[i].data[c] = orig;
      double numeric = (up - dn) / (2.0 * eps);
      double a = analytic[i].data[c];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      double rel = std::fabs(a - numeric) / denom;
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace ser::ad
