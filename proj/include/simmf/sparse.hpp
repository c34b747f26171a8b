#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace simmf {

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

// Resolution of duplicate (row, col) pairs when assembling a matrix.
enum class DuplicatePolicy { Error, Sum, Presence, Max };

/// Compressed sparse row matrix. Column indices are sorted within each row;
/// stored values are nonzero (structural zeros are never kept).
struct CsrMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> indptr;  // size rows + 1
  std::vector<int> indices;
  std::vector<double> values;

  static CsrMatrix zero(int rows, int cols);
  static CsrMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries,
                                 DuplicatePolicy dup = DuplicatePolicy::Error);

  std::int64_t nnz() const { return static_cast<std::int64_t>(indices.size()); }
  std::span<const int> row_indices(int i) const;
  std::span<const double> row_values(int i) const;
  double at(int i, int j) const;  // 0.0 when the entry is absent

  bool operator==(const CsrMatrix&) const = default;
};

CsrMatrix transpose(const CsrMatrix& a);

// C = A * B (sparse-sparse). Row-parallel; output is bit-identical to the
// serial run because every row is accumulated in the same order. Entries with
// |value| <= prune are dropped when prune > 0; exact zeros are always dropped.
CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b, bool parallel = true,
                 double prune = 0.0);

bool is_symmetric(const CsrMatrix& a, double tol = 0.0);

// Entrywise weighted sum over the union support of the inputs.
CsrMatrix weighted_sum(const std::vector<const CsrMatrix*>& mats,
                       const std::vector<double>& weights);

namespace reference {
// Naive single-threaded matrix product kept as the correctness baseline for
// the tuned kernel. Dense row buffer, no tricks.
CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b);
}  // namespace reference

}  // namespace simmf
