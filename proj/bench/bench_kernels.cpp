// Timing comparison: naive reference implementations vs the production
// kernels, single-threaded and OpenMP. Usage: bench_kernels [scale]
//
// scale 1 (default) keeps the run under a minute on a laptop.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include <omp.h>

#include "simmf/metapath.hpp"
#include "simmf/mf.hpp"
#include "simmf/sparse.hpp"

using namespace simmf;
using h_clock = std::chrono::high_resolution_clock;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = h_clock::now();
    fn();
    auto t1 = h_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

CsrMatrix random_sparse(std::mt19937_64& rng, int rows, int cols, double density) {
  std::vector<Triplet> trips;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if ((rng() % 10000) < static_cast<std::uint64_t>(density * 10000))
        trips.push_back({i, j, 1.0});
  return CsrMatrix::from_triplets(rows, cols, std::move(trips), DuplicatePolicy::Presence);
}

void report(const char* name, double ref, double serial, double parallel) {
  std::printf("%-22s %10.4f %10.4f %10.4f %8.2fx %8.2fx\n", name, ref * 1e3, serial * 1e3,
              parallel * 1e3, ref / serial, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  int scale = argc > 1 ? std::stoi(argv[1]) : 1;
  std::mt19937_64 rng(12345);

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-22s %10s %10s %10s %8s %8s\n", "kernel", "ref(ms)", "serial(ms)", "omp(ms)",
              "ref/ser", "ser/omp");

  {  // sparse product on a bipartite co-occurrence pattern
    int m = 1200 * scale, n = 900 * scale;
    CsrMatrix a = random_sparse(rng, m, n, 0.01);
    CsrMatrix at = transpose(a);
    double ref = time_best_of(3, [&] { (void)reference::spgemm(a, at); });
    double ser = time_best_of(3, [&] { (void)spgemm(a, at, false); });
    double par = time_best_of(3, [&] { (void)spgemm(a, at, true); });
    report("spgemm A*A^T", ref, ser, par);
  }

  {  // training kernels on a synthetic instance
    int m = 1500 * scale, n = 1000 * scale, d = 10;
    RatingMatrix ratings;
    ratings.users = m;
    ratings.items = n;
    for (int i = 0; i < m; ++i)
      for (int r = 0; r < 20; ++r)
        ratings.entries.push_back(
            {i, static_cast<int>(rng() % n), static_cast<double>(1 + rng() % 5)});
    std::sort(ratings.entries.begin(), ratings.entries.end(),
              [](const RatingEntry& a, const RatingEntry& b) {
                return a.user != b.user ? a.user < b.user : a.item < b.item;
              });
    ratings.entries.erase(std::unique(ratings.entries.begin(), ratings.entries.end(),
                                      [](const RatingEntry& a, const RatingEntry& b) {
                                        return a.user == b.user && a.item == b.item;
                                      }),
                          ratings.entries.end());
    ratings.build_index();

    SimilarityMatrix user_sim;
    user_sim.object_type = "U";
    user_sim.normalized = true;
    user_sim.source = "bench";
    user_sim.s = random_sparse(rng, m, m, 0.005);
    for (double& v : user_sim.s.values) v = 0.5;
    NeighborIndex nbrs = build_neighbor_index(user_sim, 8);

    TrainConfig cfg;
    cfg.d = d;
    FactorModel model = init_model(m, n, cfg);

    RegularizationSpec none;
    double ref = time_best_of(3, [&] { (void)reference::grad_user(model, ratings, none, cfg); });
    cfg.parallel = false;
    double ser = time_best_of(3, [&] { (void)grad_user(model, ratings, none, cfg); });
    cfg.parallel = true;
    double par = time_best_of(3, [&] { (void)grad_user(model, ratings, none, cfg); });
    report("grad_user plain", ref, ser, par);

    RegularizationSpec avg;
    avg.user_mode = RegMode::Average;
    avg.alpha = 1.0;
    avg.user_neighbors = &nbrs;
    ref = time_best_of(3, [&] { (void)reference::grad_user(model, ratings, avg, cfg); });
    cfg.parallel = false;
    double ser2 = time_best_of(3, [&] { (void)grad_user(model, ratings, avg, cfg); });
    cfg.parallel = true;
    double par2 = time_best_of(3, [&] { (void)grad_user(model, ratings, avg, cfg); });
    report("grad_user average", ref, ser2, par2);

    RegularizationSpec ind;
    ind.user_mode = RegMode::Individual;
    ind.alpha = 1.0;
    ind.user_similarity = &user_sim;
    ref = time_best_of(3, [&] { (void)reference::grad_user(model, ratings, ind, cfg); });
    cfg.parallel = false;
    double ser3 = time_best_of(3, [&] { (void)grad_user(model, ratings, ind, cfg); });
    cfg.parallel = true;
    double par3 = time_best_of(3, [&] { (void)grad_user(model, ratings, ind, cfg); });
    report("grad_user individual", ref, ser3, par3);

    ref = time_best_of(3, [&] { (void)reference::objective(model, ratings, ind, cfg); });
    cfg.parallel = false;
    double ser4 = time_best_of(3, [&] { (void)objective(model, ratings, ind, cfg); });
    cfg.parallel = true;
    double par4 = time_best_of(3, [&] { (void)objective(model, ratings, ind, cfg); });
    report("objective individual", ref, ser4, par4);
  }

  return 0;
}
