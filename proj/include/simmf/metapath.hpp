#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "simmf/hin.hpp"
#include "simmf/sparse.hpp"

namespace simmf {

/// An ordered sequence of entity types naming a composite relation, e.g. UMU.
struct MetaPath {
  std::vector<std::string> types;  // length >= 2
  std::string label;               // canonical concatenation of type names

  int length() const { return static_cast<int>(types.size()) - 1; }
  bool palindromic() const;
  bool symmetric_endpoints() const { return types.front() == types.back(); }
  bool traverses(const std::string& source, const std::string& target) const;
};

// Tokenizes the label against the schema's type names (longest match with
// backtracking, so multi-character type names work) and checks that every
// consecutive pair is connected by a declared relation or its transpose.
MetaPath parse_metapath(const std::string& label, const HinSchema& schema);

/// Immutable store of binarized adjacency matrices (and their transposes)
/// for meta-path composition. Safe to share across threads once built.
class RelationStore {
 public:
  // `train` replaces the rating relation, so path composition only sees
  // training-split edges. Pass nullptr to use the full rating relation.
  static RelationStore build(const HinDataset& ds, const RatingMatrix* train = nullptr);

  // Adjacency for one hop `from -> to`; throws when no declared relation (or
  // transpose) connects the pair, or when more than one does.
  const CsrMatrix& step(const std::string& from, const std::string& to) const;
  bool has_step(const std::string& from, const std::string& to) const;
  int type_count(const std::string& type) const;
  std::uint64_t signature() const { return signature_; }

 private:
  struct Hop {
    std::string from, to;
    CsrMatrix mat;
  };
  std::vector<Hop> hops_;
  std::vector<std::pair<std::string, int>> counts_;
  std::uint64_t signature_ = 0;
};

// Product of adjacency matrices along the path, evaluated left to right.
// Entry (i, j) counts path instances from i to j. `prune` drops intermediate
// entries with value <= prune (0 disables pruning).
CsrMatrix commuting_matrix(const MetaPath& path, const RelationStore& store, double prune = 0.0,
                           bool parallel = true);

/// Sparse symmetric same-type similarity, per path or fused.
struct SimilarityMatrix {
  std::string object_type;
  CsrMatrix s;
  bool normalized = false;
  std::string source;  // path label or "fused"
};

// PathSim over a palindromic path: 2*C(i,j) / (C(i,i) + C(j,j)). Objects with
// C(i,i) == 0 get an empty row. The commuting matrix must come out symmetric.
SimilarityMatrix pathsim(const MetaPath& path, const RelationStore& store, double prune = 0.0,
                         bool parallel = true);

// Similarity straight from a same-type relation's (symmetrized) adjacency;
// used for social relations where a one-hop path carries the semantics.
SimilarityMatrix adjacency_similarity(const RelationMatrix& rel);

struct NormalizationConfig {
  double beta = 1.0;  // sigmoid steepness; unrelated to the item-reg weight
};

// Maps every stored entry through 1 / (1 + exp(-beta * (s - mean))) where
// `mean` is taken over stored entries. Absent entries stay absent; ranking of
// stored entries is preserved.
SimilarityMatrix normalize_similarity(const SimilarityMatrix& sim,
                                      NormalizationConfig cfg = {});

// Entrywise weighted sum of normalized similarity matrices; weights must be
// in [0,1] and sum to 1 (tolerance 1e-9).
SimilarityMatrix fuse_similarities(const std::vector<SimilarityMatrix>& sims,
                                   const std::vector<double>& weights);

/// Top-k neighbor lists plus the exact reverse map.
/// `plus_*` holds T+(i): the k most similar objects to i (self excluded),
/// stored by ascending object index together with their similarity weights.
/// `minus_*` holds T-(i): pairs (g, w) with i in T+(g) and w = S(g, i).
struct NeighborIndex {
  int k = 0;
  std::vector<std::int64_t> plus_ptr;
  std::vector<int> plus_idx;
  std::vector<double> plus_weight;
  std::vector<double> plus_weight_sum;  // sum of T+(i) weights; 0 when empty
  std::vector<std::int64_t> minus_ptr;
  std::vector<int> minus_idx;
  std::vector<double> minus_weight;

  int size() const { return static_cast<int>(plus_ptr.size()) - 1; }
  std::span<const int> plus(int i) const {
    return {plus_idx.data() + plus_ptr[i], plus_idx.data() + plus_ptr[i + 1]};
  }
  std::span<const double> plus_w(int i) const {
    return {plus_weight.data() + plus_ptr[i], plus_weight.data() + plus_ptr[i + 1]};
  }
};

// Ties in the top-k selection break by ascending object index.
NeighborIndex build_neighbor_index(const SimilarityMatrix& sim, int k);

// k as a fraction of the object count, floored at 1.
int neighbor_count_from_fraction(int object_count, double fraction);

// Restriction of `sim` to the union support {(i,j): j in T+(i) or i in T+(j)};
// keeps the individual-regularization cost at O(m*k) per pass.
SimilarityMatrix topk_support(const SimilarityMatrix& sim, const NeighborIndex& nbrs);

// --- similarity cache -------------------------------------------------------

struct SimCacheKey {
  std::uint64_t store_signature = 0;  // dataset checksum + split content
  std::string path_label;
  std::string measure;  // "pathsim" or "adjacency"
  bool normalized = false;
  double norm_beta = 1.0;
  double prune = 0.0;

  std::uint64_t hash() const;
};

std::optional<SimilarityMatrix> load_cached_similarity(const std::string& dir,
                                                       const SimCacheKey& key);
void store_cached_similarity(const std::string& dir, const SimCacheKey& key,
                             const SimilarityMatrix& sim);

}  // namespace simmf
