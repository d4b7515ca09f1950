// Dense row-major matrices and the matrix kernels used by the tape.
//
// Every kernel ships in two forms: a plain serial reference (`*_serial`) and
// the default entry point, which parallelizes over output rows with OpenMP
// once the work crosses a grain threshold. Each output element is owned by
// exactly one thread and its inner accumulation order is fixed, so both forms
// produce bitwise-identical results at any thread count.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ser::lin {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  Matrix(int r, int c, std::vector<double> d);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  static Matrix zeros_like(const Matrix& m) { return Matrix(m.rows, m.cols); }
  static Matrix identity(int n);
};

std::string shape_str(const Matrix& m);

// out = a * b (+ out when accumulate). Shapes checked, throws on mismatch.
void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

// out = a * b^T
void matmul_nt_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

// out = a^T * b
void matmul_tn_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

// Elementwise helpers (always cheap; serial).
void add_inplace(Matrix& dst, const Matrix& src);
void scale_inplace(Matrix& m, double s);

// Flop threshold below which the parallel entry points stay serial.
inline constexpr std::size_t kParallelGrain = 32 * 1024;

}  // namespace ser::lin
