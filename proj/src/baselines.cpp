#include "simmf/baselines.hpp"

#include "simmf/errors.hpp"

namespace simmf {

MeanModel fit_mean(const RatingMatrix& train, MeanKind kind) {
  if (train.entries.empty()) throw ValidationError("fit_mean: empty training set");
  int n = kind == MeanKind::User ? train.users : train.items;
  MeanModel m;
  m.kind = kind;
  m.means.assign(static_cast<size_t>(n), 0.0);
  m.has.assign(static_cast<size_t>(n), 0);
  std::vector<int> counts(static_cast<size_t>(n), 0);
  double total = 0.0;
  for (const RatingEntry& e : train.entries) {
    int o = kind == MeanKind::User ? e.user : e.item;
    m.means[o] += e.value;
    counts[o]++;
    total += e.value;
  }
  for (int o = 0; o < n; ++o) {
    if (counts[o] > 0) {
      m.means[o] /= counts[o];
      m.has[o] = 1;
    }
  }
  m.global_mean = total / static_cast<double>(train.entries.size());
  return m;
}

TrainResult pmf_preset(const RatingMatrix& ratings, TrainConfig cfg) {
  RegularizationSpec reg;  // both sides off
  return train(ratings, reg, cfg);
}

TrainResult somf_preset(const HinDataset& ds, const RatingMatrix& ratings, TrainConfig cfg,
                        SomfOptions opts) {
  const RelationMatrix* social = ds.find_relation(ds.user_type, ds.user_type);
  if (!social)
    throw NotApplicableError("somf is not applicable: dataset has no " + ds.user_type + "-" +
                             ds.user_type + " social relation");
  SimilarityMatrix raw = adjacency_similarity(*social);
  if (raw.s.nnz() == 0)
    throw NotApplicableError("somf is not applicable: social relation '" + social->name +
                             "' is empty");
  SimilarityMatrix sim = normalize_similarity(raw, {opts.norm_beta});
  int k = opts.k > 0 ? opts.k : neighbor_count_from_fraction(ratings.users, opts.k_fraction);
  NeighborIndex nbrs = build_neighbor_index(sim, k);

  RegularizationSpec reg;
  reg.user_mode = RegMode::Average;
  reg.alpha = opts.alpha;
  reg.user_neighbors = &nbrs;
  return train(ratings, reg, cfg);
}

}  // namespace simmf
