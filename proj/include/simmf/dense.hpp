#pragma once

#include <cstddef>
#include <vector>

namespace simmf {

/// Row-major dense matrix used for latent factors and gradients.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  bool operator==(const DenseMatrix&) const = default;
};

double frobenius_sq(const DenseMatrix& a);
double frobenius_sq_diff(const DenseMatrix& a, const DenseMatrix& b);
bool all_finite(const DenseMatrix& a);

}  // namespace simmf
