#include "simmf/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace simmf {

CsrMatrix CsrMatrix::zero(int rows, int cols) {
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.indptr.assign(static_cast<size_t>(rows) + 1, 0);
  return m;
}

CsrMatrix CsrMatrix::from_triplets(int rows, int cols, std::vector<Triplet> entries,
                                   DuplicatePolicy dup) {
  for (const Triplet& t : entries) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw std::out_of_range("triplet index (" + std::to_string(t.row) + "," +
                              std::to_string(t.col) + ") outside " + std::to_string(rows) +
                              "x" + std::to_string(cols));
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  CsrMatrix m = zero(rows, cols);
  m.indices.reserve(entries.size());
  m.values.reserve(entries.size());
  size_t i = 0;
  while (i < entries.size()) {
    size_t j = i + 1;
    double v = entries[i].value;
    if (dup == DuplicatePolicy::Presence) v = 1.0;
    while (j < entries.size() && entries[j].row == entries[i].row &&
           entries[j].col == entries[i].col) {
      switch (dup) {
        case DuplicatePolicy::Error:
          throw std::invalid_argument("duplicate entry at (" + std::to_string(entries[i].row) +
                                      "," + std::to_string(entries[i].col) + ")");
        case DuplicatePolicy::Sum:
          v += entries[j].value;
          break;
        case DuplicatePolicy::Presence:
          break;
        case DuplicatePolicy::Max:
          v = std::max(v, entries[j].value);
          break;
      }
      ++j;
    }
    if (v != 0.0) {
      m.indices.push_back(entries[i].col);
      m.values.push_back(v);
    }
    m.indptr[static_cast<size_t>(entries[i].row) + 1] = static_cast<std::int64_t>(m.indices.size());
    i = j;
  }
  for (size_t r = 1; r < m.indptr.size(); ++r)
    m.indptr[r] = std::max(m.indptr[r], m.indptr[r - 1]);
  return m;
}

std::span<const int> CsrMatrix::row_indices(int i) const {
  return {indices.data() + indptr[i], indices.data() + indptr[i + 1]};
}

std::span<const double> CsrMatrix::row_values(int i) const {
  return {values.data() + indptr[i], values.data() + indptr[i + 1]};
}

double CsrMatrix::at(int i, int j) const {
  auto idx = row_indices(i);
  auto it = std::lower_bound(idx.begin(), idx.end(), j);
  if (it == idx.end() || *it != j) return 0.0;
  return values[indptr[i] + (it - idx.begin())];
}

CsrMatrix transpose(const CsrMatrix& a) {
  CsrMatrix t = CsrMatrix::zero(a.cols, a.rows);
  t.indices.assign(a.indices.size(), 0);
  t.values.assign(a.values.size(), 0.0);
  // column counts
  for (int c : a.indices) t.indptr[static_cast<size_t>(c) + 1]++;
  for (size_t r = 1; r < t.indptr.size(); ++r) t.indptr[r] += t.indptr[r - 1];
  std::vector<std::int64_t> next(t.indptr.begin(), t.indptr.end() - 1);
  for (int r = 0; r < a.rows; ++r) {
    for (std::int64_t k = a.indptr[r]; k < a.indptr[r + 1]; ++k) {
      std::int64_t pos = next[a.indices[k]]++;
      t.indices[pos] = r;
      t.values[pos] = a.values[k];
    }
  }
  return t;
}

namespace {

// Dense per-row accumulator shared by spgemm and weighted_sum. Emits the
// accumulated row with sorted column indices.
struct RowAccumulator {
  explicit RowAccumulator(int cols)
      : sums(static_cast<size_t>(cols), 0.0), seen(static_cast<size_t>(cols), 0) {
    touched.reserve(64);
  }

  void add(int col, double v) {
    if (!seen[col]) {
      seen[col] = 1;
      touched.push_back(col);
    }
    sums[col] += v;
  }

  template <typename Emit>
  void flush(Emit emit, double prune) {
    // For dense rows a linear sweep beats sorting the touched list.
    if (touched.size() > sums.size() / 8) {
      for (int c = 0; c < static_cast<int>(sums.size()); ++c) {
        if (!seen[c]) continue;
        if (sums[c] != 0.0 && std::abs(sums[c]) > prune) emit(c, sums[c]);
        seen[c] = 0;
        sums[c] = 0.0;
      }
    } else {
      std::sort(touched.begin(), touched.end());
      for (int c : touched) {
        if (sums[c] != 0.0 && std::abs(sums[c]) > prune) emit(c, sums[c]);
        seen[c] = 0;
        sums[c] = 0.0;
      }
    }
    touched.clear();
  }

  std::vector<double> sums;
  std::vector<char> seen;
  std::vector<int> touched;
};

void check_product_shapes(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("spgemm shape mismatch: " + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols));
}

}  // namespace

CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b, bool parallel, double prune) {
  check_product_shapes(a, b);
  CsrMatrix c = CsrMatrix::zero(a.rows, b.cols);
  std::vector<std::int64_t> row_nnz(static_cast<size_t>(a.rows), 0);

  // pass 1: nnz per output row
#pragma omp parallel if (parallel)
  {
    RowAccumulator acc(b.cols);
#pragma omp for schedule(dynamic, 16)
    for (int i = 0; i < a.rows; ++i) {
      for (std::int64_t k = a.indptr[i]; k < a.indptr[i + 1]; ++k) {
        int j = a.indices[k];
        double v = a.values[k];
        for (std::int64_t l = b.indptr[j]; l < b.indptr[j + 1]; ++l)
          acc.add(b.indices[l], v * b.values[l]);
      }
      std::int64_t n = 0;
      acc.flush([&](int, double) { ++n; }, prune);
      row_nnz[i] = n;
    }
  }
  for (int i = 0; i < a.rows; ++i) c.indptr[static_cast<size_t>(i) + 1] = c.indptr[i] + row_nnz[i];
  c.indices.assign(static_cast<size_t>(c.indptr[a.rows]), 0);
  c.values.assign(static_cast<size_t>(c.indptr[a.rows]), 0.0);

  // pass 2: fill
#pragma omp parallel if (parallel)
  {
    RowAccumulator acc(b.cols);
#pragma omp for schedule(dynamic, 16)
    for (int i = 0; i < a.rows; ++i) {
      for (std::int64_t k = a.indptr[i]; k < a.indptr[i + 1]; ++k) {
        int j = a.indices[k];
        double v = a.values[k];
        for (std::int64_t l = b.indptr[j]; l < b.indptr[j + 1]; ++l)
          acc.add(b.indices[l], v * b.values[l]);
      }
      std::int64_t pos = c.indptr[i];
      acc.flush(
          [&](int col, double val) {
            c.indices[pos] = col;
            c.values[pos] = val;
            ++pos;
          },
          prune);
    }
  }
  return c;
}

bool is_symmetric(const CsrMatrix& a, double tol) {
  if (a.rows != a.cols) return false;
  CsrMatrix t = transpose(a);
  if (t.indptr != a.indptr || t.indices != a.indices) return false;
  for (size_t k = 0; k < a.values.size(); ++k)
    if (std::abs(a.values[k] - t.values[k]) > tol) return false;
  return true;
}

CsrMatrix weighted_sum(const std::vector<const CsrMatrix*>& mats,
                       const std::vector<double>& weights) {
  if (mats.empty() || mats.size() != weights.size())
    throw std::invalid_argument("weighted_sum: need one weight per matrix");
  int rows = mats[0]->rows, cols = mats[0]->cols;
  for (const CsrMatrix* m : mats)
    if (m->rows != rows || m->cols != cols)
      throw std::invalid_argument("weighted_sum: shape mismatch");

  CsrMatrix out = CsrMatrix::zero(rows, cols);
  RowAccumulator acc(cols);
  for (int i = 0; i < rows; ++i) {
    for (size_t m = 0; m < mats.size(); ++m) {
      const CsrMatrix& mat = *mats[m];
      for (std::int64_t k = mat.indptr[i]; k < mat.indptr[i + 1]; ++k)
        acc.add(mat.indices[k], weights[m] * mat.values[k]);
    }
    acc.flush(
        [&](int col, double val) {
          out.indices.push_back(col);
          out.values.push_back(val);
        },
        0.0);
    out.indptr[static_cast<size_t>(i) + 1] = static_cast<std::int64_t>(out.indices.size());
  }
  return out;
}

namespace reference {

CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b) {
  check_product_shapes(a, b);
  CsrMatrix c = CsrMatrix::zero(a.rows, b.cols);
  std::vector<double> row(static_cast<size_t>(b.cols), 0.0);
  for (int i = 0; i < a.rows; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::int64_t k = a.indptr[i]; k < a.indptr[i + 1]; ++k) {
      int j = a.indices[k];
      for (std::int64_t l = b.indptr[j]; l < b.indptr[j + 1]; ++l)
        row[b.indices[l]] += a.values[k] * b.values[l];
    }
    for (int col = 0; col < b.cols; ++col) {
      if (row[col] != 0.0) {
        c.indices.push_back(col);
        c.values.push_back(row[col]);
      }
    }
    c.indptr[static_cast<size_t>(i) + 1] = static_cast<std::int64_t>(c.indices.size());
  }
  return c;
}

}  // namespace reference

}  // namespace simmf
