#include "simmf/metapath.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "simmf/errors.hpp"

namespace simmf {

namespace fs = std::filesystem;

bool MetaPath::palindromic() const {
  size_t n = types.size();
  for (size_t i = 0; i < n / 2; ++i)
    if (types[i] != types[n - 1 - i]) return false;
  return true;
}

bool MetaPath::traverses(const std::string& source, const std::string& target) const {
  for (size_t i = 0; i + 1 < types.size(); ++i) {
    if (types[i] == source && types[i + 1] == target) return true;
    if (types[i] == target && types[i + 1] == source) return true;
  }
  return false;
}

namespace {

// Longest-match tokenization with backtracking so multi-character type names
// cannot shadow shorter ones.
bool tokenize(const std::string& label, size_t pos, const std::vector<std::string>& names,
              std::vector<std::string>& out) {
  if (pos == label.size()) return !out.empty();
  std::vector<const std::string*> candidates;
  for (const std::string& n : names)
    if (label.compare(pos, n.size(), n) == 0) candidates.push_back(&n);
  std::sort(candidates.begin(), candidates.end(),
            [](const std::string* a, const std::string* b) { return a->size() > b->size(); });
  for (const std::string* c : candidates) {
    out.push_back(*c);
    if (tokenize(label, pos + c->size(), names, out)) return true;
    out.pop_back();
  }
  return false;
}

}  // namespace

MetaPath parse_metapath(const std::string& label, const HinSchema& schema) {
  std::vector<std::string> names;
  for (const EntityType& t : schema.entity_types) names.push_back(t.name);

  std::vector<std::string> tokens;
  if (!tokenize(label, 0, names, tokens))
    throw ValidationError("meta path '" + label + "': unknown entity type in label");
  if (tokens.size() < 2)
    throw ValidationError("meta path '" + label + "': need at least two entity types");

  auto connected = [&](const std::string& a, const std::string& b) {
    int n = 0;
    for (const RelationDecl& r : schema.relations) {
      if (r.source == a && r.target == b) ++n;
      if (r.source == b && r.target == a && !(a == b)) ++n;
    }
    return n;
  };
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    int n = connected(tokens[i], tokens[i + 1]);
    if (n == 0)
      throw ValidationError("meta path '" + label + "': no declared relation between '" +
                            tokens[i] + "' and '" + tokens[i + 1] + "'");
    if (n > 1)
      throw ValidationError("meta path '" + label + "': ambiguous relation between '" +
                            tokens[i] + "' and '" + tokens[i + 1] + "'");
  }

  MetaPath p;
  p.types = std::move(tokens);
  p.label = label;
  return p;
}

RelationStore RelationStore::build(const HinDataset& ds, const RatingMatrix* train) {
  RelationStore store;
  std::uint64_t sig = ds.checksum;
  for (const RelationMatrix& rel : ds.relations) {
    CsrMatrix mat = rel.mat;
    bool is_rating = rel.source == ds.user_type && rel.target == ds.item_type &&
                     rel.name == ds.schema.rating_relation().name;
    if (train && is_rating) {
      std::vector<Triplet> trips;
      trips.reserve(train->entries.size());
      for (const RatingEntry& e : train->entries) trips.push_back({e.user, e.item, 1.0});
      mat = CsrMatrix::from_triplets(rel.mat.rows, rel.mat.cols, std::move(trips),
                                     DuplicatePolicy::Presence);
      for (const RatingEntry& e : train->entries) {
        sig = fnv1a(&e.user, sizeof(e.user), sig);
        sig = fnv1a(&e.item, sizeof(e.item), sig);
      }
    }
    store.hops_.push_back({rel.source, rel.target, mat});
    if (rel.source != rel.target)
      store.hops_.push_back({rel.target, rel.source, transpose(mat)});
  }
  for (const auto& [type, map] : ds.id_maps) store.counts_.emplace_back(type, map.size());
  store.signature_ = sig;
  return store;
}

bool RelationStore::has_step(const std::string& from, const std::string& to) const {
  for (const Hop& h : hops_)
    if (h.from == from && h.to == to) return true;
  return false;
}

const CsrMatrix& RelationStore::step(const std::string& from, const std::string& to) const {
  const CsrMatrix* found = nullptr;
  for (const Hop& h : hops_) {
    if (h.from == from && h.to == to) {
      if (found)
        throw ValidationError("ambiguous relation step '" + from + "' -> '" + to + "'");
      found = &h.mat;
    }
  }
  if (!found) throw ValidationError("no relation step '" + from + "' -> '" + to + "'");
  return *found;
}

int RelationStore::type_count(const std::string& type) const {
  for (const auto& [name, count] : counts_)
    if (name == type) return count;
  throw ValidationError("unknown entity type '" + type + "'");
}

CsrMatrix commuting_matrix(const MetaPath& path, const RelationStore& store, double prune,
                           bool parallel) {
  CsrMatrix acc = store.step(path.types[0], path.types[1]);
  for (size_t i = 1; i + 1 < path.types.size(); ++i) {
    const CsrMatrix& next = store.step(path.types[i], path.types[i + 1]);
    if (acc.cols != next.rows)
      throw ValidationError("commuting matrix for '" + path.label +
                            "': dimension mismatch (relation store corrupt)");
    acc = spgemm(acc, next, parallel, prune);
  }
  return acc;
}

SimilarityMatrix pathsim(const MetaPath& path, const RelationStore& store, double prune,
                         bool parallel) {
  if (!path.palindromic() || !path.symmetric_endpoints())
    throw ValidationError("pathsim requires a palindromic path, got '" + path.label + "'");
  CsrMatrix c = commuting_matrix(path, store, prune, parallel);
  if (!is_symmetric(c))
    throw ValidationError("pathsim: commuting matrix of '" + path.label +
                          "' is not symmetric (asymmetric self-relation on the path)");

  std::vector<double> diag(static_cast<size_t>(c.rows), 0.0);
  for (int i = 0; i < c.rows; ++i) diag[i] = c.at(i, i);

  SimilarityMatrix sim;
  sim.object_type = path.types.front();
  sim.source = path.label;
  sim.normalized = false;
  CsrMatrix& s = sim.s;
  s = CsrMatrix::zero(c.rows, c.cols);
  s.indices.reserve(c.indices.size());
  s.values.reserve(c.values.size());
  for (int i = 0; i < c.rows; ++i) {
    if (diag[i] > 0.0) {
      auto idx = c.row_indices(i);
      auto val = c.row_values(i);
      for (size_t k = 0; k < idx.size(); ++k) {
        int j = idx[k];
        if (val[k] <= 0.0 || diag[j] <= 0.0) continue;
        s.indices.push_back(j);
        s.values.push_back(2.0 * val[k] / (diag[i] + diag[j]));
      }
    }
    s.indptr[static_cast<size_t>(i) + 1] = static_cast<std::int64_t>(s.indices.size());
  }
  return sim;
}

SimilarityMatrix adjacency_similarity(const RelationMatrix& rel) {
  if (rel.source != rel.target)
    throw ValidationError("adjacency similarity needs a same-type relation, got '" + rel.name +
                          "' (" + rel.source + " -> " + rel.target + ")");
  std::vector<Triplet> trips;
  for (int i = 0; i < rel.mat.rows; ++i) {
    auto idx = rel.mat.row_indices(i);
    for (int j : idx) {
      if (j == i) continue;
      trips.push_back({i, j, 1.0});
      trips.push_back({j, i, 1.0});
    }
  }
  SimilarityMatrix sim;
  sim.object_type = rel.source;
  sim.source = rel.name;
  sim.s = CsrMatrix::from_triplets(rel.mat.rows, rel.mat.cols, std::move(trips),
                                   DuplicatePolicy::Presence);
  return sim;
}

SimilarityMatrix normalize_similarity(const SimilarityMatrix& sim, NormalizationConfig cfg) {
  if (sim.normalized)
    throw ValidationError("similarity '" + sim.source + "' is already normalized");
  if (sim.s.nnz() == 0)
    throw ValidationError("cannot normalize empty similarity ('" + sim.source + "')");
  double mean = 0.0;
  for (double v : sim.s.values) mean += v;
  mean /= static_cast<double>(sim.s.nnz());

  SimilarityMatrix out = sim;
  for (double& v : out.s.values) v = 1.0 / (1.0 + std::exp(-cfg.beta * (v - mean)));
  out.normalized = true;
  return out;
}

SimilarityMatrix fuse_similarities(const std::vector<SimilarityMatrix>& sims,
                                   const std::vector<double>& weights) {
  if (sims.empty()) throw ValidationError("fuse: no similarity matrices given");
  if (sims.size() != weights.size())
    throw ValidationError("fuse: need one weight per similarity matrix");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || w > 1.0) throw ValidationError("fuse: weights must lie in [0,1]");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("fuse: weights sum to " + std::to_string(sum) + ", expected 1");
  std::vector<const CsrMatrix*> mats;
  for (const SimilarityMatrix& s : sims) {
    if (s.object_type != sims[0].object_type)
      throw ValidationError("fuse: mixed object types ('" + s.object_type + "' vs '" +
                            sims[0].object_type + "')");
    if (!s.normalized)
      throw ValidationError("fuse: similarity '" + s.source + "' is not normalized");
    mats.push_back(&s.s);
  }
  SimilarityMatrix out;
  out.object_type = sims[0].object_type;
  out.normalized = true;
  out.source = "fused";
  out.s = weighted_sum(mats, weights);
  return out;
}

int neighbor_count_from_fraction(int object_count, double fraction) {
  int k = static_cast<int>(object_count * fraction);
  return std::max(1, k);
}

NeighborIndex build_neighbor_index(const SimilarityMatrix& sim, int k) {
  if (k < 1) throw ValidationError("neighbor index: k must be >= 1");
  if (!sim.normalized && sim.source != "fused")
    throw ValidationError("neighbor index: similarity must be normalized or fused");
  const CsrMatrix& s = sim.s;
  int n = s.rows;

  NeighborIndex ix;
  ix.k = k;
  ix.plus_ptr.assign(static_cast<size_t>(n) + 1, 0);
  ix.plus_weight_sum.assign(static_cast<size_t>(n), 0.0);

  std::vector<std::pair<int, double>> cand;
  for (int i = 0; i < n; ++i) {
    cand.clear();
    auto idx = s.row_indices(i);
    auto val = s.row_values(i);
    for (size_t p = 0; p < idx.size(); ++p)
      if (idx[p] != i) cand.emplace_back(idx[p], val[p]);
    // largest similarity first, ties by ascending object index
    auto better = [](const std::pair<int, double>& a, const std::pair<int, double>& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    };
    size_t keep = std::min<size_t>(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(), better);
    cand.resize(keep);
    std::sort(cand.begin(), cand.end());  // store by neighbor index
    for (auto& [j, w] : cand) {
      ix.plus_idx.push_back(j);
      ix.plus_weight.push_back(w);
      ix.plus_weight_sum[i] += w;
    }
    ix.plus_ptr[static_cast<size_t>(i) + 1] = static_cast<std::int64_t>(ix.plus_idx.size());
  }

  // exact reverse map: i in T-(j) iff j in T+(i)
  std::vector<std::int64_t> counts(static_cast<size_t>(n) + 1, 0);
  for (int j : ix.plus_idx) ++counts[static_cast<size_t>(j) + 1];
  for (size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
  ix.minus_ptr = counts;
  ix.minus_idx.assign(ix.plus_idx.size(), 0);
  ix.minus_weight.assign(ix.plus_idx.size(), 0.0);
  std::vector<std::int64_t> next(counts.begin(), counts.end() - 1);
  for (int g = 0; g < n; ++g) {
    for (std::int64_t p = ix.plus_ptr[g]; p < ix.plus_ptr[g + 1]; ++p) {
      int i = ix.plus_idx[p];
      std::int64_t pos = next[i]++;
      ix.minus_idx[pos] = g;
      ix.minus_weight[pos] = ix.plus_weight[p];
    }
  }
  return ix;
}

SimilarityMatrix topk_support(const SimilarityMatrix& sim, const NeighborIndex& nbrs) {
  std::vector<Triplet> trips;
  trips.reserve(2 * nbrs.plus_idx.size());
  int n = nbrs.size();
  for (int i = 0; i < n; ++i) {
    auto js = nbrs.plus(i);
    auto ws = nbrs.plus_w(i);
    for (size_t p = 0; p < js.size(); ++p) {
      trips.push_back({i, js[p], ws[p]});
      trips.push_back({js[p], i, ws[p]});
    }
  }
  SimilarityMatrix out;
  out.object_type = sim.object_type;
  out.normalized = sim.normalized;
  out.source = sim.source + "|topk";
  out.s = CsrMatrix::from_triplets(sim.s.rows, sim.s.cols, std::move(trips),
                                   DuplicatePolicy::Max);
  return out;
}

// --- similarity cache -------------------------------------------------------

std::uint64_t SimCacheKey::hash() const {
  std::uint64_t h = fnv1a(&store_signature, sizeof(store_signature));
  h = fnv1a_str(path_label, h);
  h = fnv1a_str(measure, h);
  char n = normalized ? 1 : 0;
  h = fnv1a(&n, 1, h);
  h = fnv1a(&norm_beta, sizeof(norm_beta), h);
  h = fnv1a(&prune, sizeof(prune), h);
  return h;
}

namespace {

constexpr std::uint32_t kCacheMagic = 0x53494d43;  // "SIMC"
constexpr std::uint32_t kCacheVersion = 1;

std::string cache_path(const std::string& dir, const SimCacheKey& key) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(key.hash()));
  return (fs::path(dir) / (key.path_label + "-" + buf + ".simc")).string();
}

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(in);
}

}  // namespace

void store_cached_similarity(const std::string& dir, const SimCacheKey& key,
                             const SimilarityMatrix& sim) {
  fs::create_directories(dir);
  std::string path = cache_path(dir, key);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write similarity cache " + path);
  put(out, kCacheMagic);
  put(out, kCacheVersion);
  std::uint64_t h = key.hash();
  put(out, h);
  std::uint32_t type_len = static_cast<std::uint32_t>(sim.object_type.size());
  put(out, type_len);
  out.write(sim.object_type.data(), type_len);
  std::uint32_t src_len = static_cast<std::uint32_t>(sim.source.size());
  put(out, src_len);
  out.write(sim.source.data(), src_len);
  char norm = sim.normalized ? 1 : 0;
  put(out, norm);
  put(out, sim.s.rows);
  put(out, sim.s.cols);
  std::int64_t nnz = sim.s.nnz();
  put(out, nnz);
  out.write(reinterpret_cast<const char*>(sim.s.indptr.data()),
            static_cast<std::streamsize>(sim.s.indptr.size() * sizeof(std::int64_t)));
  out.write(reinterpret_cast<const char*>(sim.s.indices.data()),
            static_cast<std::streamsize>(sim.s.indices.size() * sizeof(int)));
  out.write(reinterpret_cast<const char*>(sim.s.values.data()),
            static_cast<std::streamsize>(sim.s.values.size() * sizeof(double)));
}

std::optional<SimilarityMatrix> load_cached_similarity(const std::string& dir,
                                                       const SimCacheKey& key) {
  std::string path = cache_path(dir, key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::uint32_t magic = 0, version = 0;
  std::uint64_t h = 0;
  if (!get(in, magic) || magic != kCacheMagic) return std::nullopt;
  if (!get(in, version) || version != kCacheVersion) return std::nullopt;
  if (!get(in, h) || h != key.hash()) return std::nullopt;  // stale: recompute
  SimilarityMatrix sim;
  std::uint32_t type_len = 0;
  if (!get(in, type_len)) return std::nullopt;
  sim.object_type.resize(type_len);
  in.read(sim.object_type.data(), type_len);
  std::uint32_t src_len = 0;
  if (!get(in, src_len)) return std::nullopt;
  sim.source.resize(src_len);
  in.read(sim.source.data(), src_len);
  char norm = 0;
  if (!get(in, norm)) return std::nullopt;
  sim.normalized = norm != 0;
  std::int64_t nnz = 0;
  if (!get(in, sim.s.rows) || !get(in, sim.s.cols) || !get(in, nnz)) return std::nullopt;
  sim.s.indptr.resize(static_cast<size_t>(sim.s.rows) + 1);
  sim.s.indices.resize(static_cast<size_t>(nnz));
  sim.s.values.resize(static_cast<size_t>(nnz));
  in.read(reinterpret_cast<char*>(sim.s.indptr.data()),
          static_cast<std::streamsize>(sim.s.indptr.size() * sizeof(std::int64_t)));
  in.read(reinterpret_cast<char*>(sim.s.indices.data()),
          static_cast<std::streamsize>(sim.s.indices.size() * sizeof(int)));
  in.read(reinterpret_cast<char*>(sim.s.values.data()),
          static_cast<std::streamsize>(sim.s.values.size() * sizeof(double)));
  if (!in) return std::nullopt;
  return sim;
}

}  // namespace simmf
