#include "ser/linalg.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ser::lin {

Matrix::Matrix(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != static_cast<std::size_t>(r) * c)
    throw std::invalid_argument("matrix data length does not match shape");
}

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

namespace {

void check_shapes(const char* op, const Matrix& a, const Matrix& b, const Matrix& out, int ar,
                  int ac, int br, int bc) {
  // ar/ac/br/bc give the effective (post-transpose) operand shapes.
  if (ac != br)
    throw std::invalid_argument(std::string(op) + ": inner dims mismatch " + shape_str(a) + " vs " +
                                shape_str(b));
  if (out.rows != ar || out.cols != bc)
    throw std::invalid_argument(std::string(op) + ": output shape " + shape_str(out) +
                                " should be " + std::to_string(ar) + "x" + std::to_string(bc));
}

}  // namespace

void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_shapes("matmul", a, b, out, a.rows, a.cols, b.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * b.at(k, j);
      orow[j] = accumulate ? orow[j] + acc : acc;
    }
  }
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_shapes("matmul", a, b, out, a.rows, a.cols, b.rows, b.cols);
  const std::size_t work =
      static_cast<std::size_t>(a.rows) * static_cast<std::size_t>(b.cols) * a.cols;
  if (work < kParallelGrain) {
    matmul_serial(a, b, out, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * b.at(k, j);
      orow[j] = accumulate ? orow[j] + acc : acc;
    }
  }
}

void matmul_nt_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_shapes("matmul_nt", a, b, out, a.rows, a.cols, b.cols, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      orow[j] = accumulate ? orow[j] + acc : acc;
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_shapes("matmul_nt", a, b, out, a.rows, a.cols, b.cols, b.rows);
  const std::size_t work =
      static_cast<std::size_t>(a.rows) * static_cast<std::size_t>(b.rows) * a.cols;
  if (work < kParallelGrain) {
    matmul_nt_serial(a, b, out, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      orow[j] = accumulate ? orow[j] + acc : acc;
    }
  }
}

void matmul_tn_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_shapes("matmul_tn", a, b, out, a.cols, a.rows, b.rows, b.cols);
  for (int i = 0; i < a.cols; ++i) {
    double* orow = out.row(i);
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.rows; ++k) acc += a.at(k, i) * b.at(k, j);
      orow[j] = accumulate ? orow[j] + acc : acc;
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_shapes("matmul_tn", a, b, out, a.cols, a.rows, b.rows, b.cols);
  const std::size_t work =
      static_cast<std::size_t>(a.cols) * static_cast<std::size_t>(b.cols) * a.rows;
  if (work < kParallelGrain) {
    matmul_tn_serial(a, b, out, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.cols; ++i) {
    double* orow = out.row(i);
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.rows; ++k) acc += a.at(k, i) * b.at(k, j);
      orow[j] = accumulate ? orow[j] + acc : acc;
    }
  }
}

void add_inplace(Matrix& dst, const Matrix& src) {
  if (!dst.same_shape(src))
    throw std::invalid_argument("add_inplace: shape mismatch " + shape_str(dst) + " vs " +
                                shape_str(src));
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void scale_inplace(Matrix& m, double s) {
  for (double& v : m.data) v *= s;
}

}  // namespace ser::lin
