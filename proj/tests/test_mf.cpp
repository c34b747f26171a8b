#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "simmf/errors.hpp"
#include "simmf/mf.hpp"
#include "support.hpp"

using namespace simmf;

namespace {

RatingMatrix single_rating(double value) {
  RatingMatrix r;
  r.users = 2;
  r.items = 2;
  r.entries = {{0, 1, value}};
  r.build_index();
  return r;
}

FactorModel zero_model(int users, int items, int d) {
  FactorModel m;
  m.d = d;
  m.user_factors = DenseMatrix(users, d);
  m.item_factors = DenseMatrix(items, d);
  return m;
}

struct Instance {
  RatingMatrix ratings;
  SimilarityMatrix user_sim, item_sim;
  NeighborIndex user_nbrs, item_nbrs;
  FactorModel model;
};

Instance random_instance(std::mt19937_64& rng) {
  Instance in;
  int m = 2 + static_cast<int>(rng() % 7);
  int n = 2 + static_cast<int>(rng() % 7);
  int d = 1 + static_cast<int>(rng() % 4);
  in.ratings = oracles::random_ratings(rng, m, n);
  in.user_sim = oracles::random_similarity(rng, m);
  in.item_sim = oracles::random_similarity(rng, n);
  in.user_nbrs = build_neighbor_index(in.user_sim, 1 + static_cast<int>(rng() % 3));
  in.item_nbrs = build_neighbor_index(in.item_sim, 1 + static_cast<int>(rng() % 3));
  in.model = oracles::random_model(rng, m, n, d);
  return in;
}

RegularizationSpec spec_for(const Instance& in, RegMode user_mode, RegMode item_mode,
                            double alpha, double beta) {
  RegularizationSpec reg;
  reg.user_mode = user_mode;
  reg.item_mode = item_mode;
  reg.alpha = alpha;
  reg.beta = beta;
  reg.user_neighbors = &in.user_nbrs;
  reg.user_similarity = &in.user_sim;
  reg.item_neighbors = &in.item_nbrs;
  reg.item_similarity = &in.item_sim;
  return reg;
}

const RegMode kModes[] = {RegMode::None, RegMode::Average, RegMode::Individual};

}  // namespace

TEST_CASE("predict is the factor dot product with range checks") {
  FactorModel m = zero_model(2, 2, 2);
  m.user_factors.at(0, 0) = 1.0;
  m.user_factors.at(0, 1) = 0.0;
  m.item_factors.at(1, 0) = 0.5;
  m.item_factors.at(1, 1) = 2.0;
  CHECK(predict(m, 0, 1) == doctest::Approx(0.5));
  CHECK(predict(m, 1, 1) == 0.0);  // all-zero user row

  FactorModel one = zero_model(1, 1, 1);
  one.user_factors.at(0, 0) = 2.0;
  one.item_factors.at(0, 0) = 3.0;
  CHECK(predict(one, 0, 0) == doctest::Approx(6.0));

  CHECK_THROWS_AS(predict(m, 2, 0), std::out_of_range);
  CHECK_THROWS_AS(predict(m, 0, -1), std::out_of_range);
}

TEST_CASE("objective on hand-computed cases") {
  TrainConfig cfg;
  cfg.lambda1 = cfg.lambda2 = 0.0;
  RegularizationSpec none;

  // zero factors, single rating of 4: only the squared error term remains
  RatingMatrix r = single_rating(4.0);
  FactorModel zero = zero_model(2, 2, 2);
  CHECK(objective(zero, r, none, cfg) == doctest::Approx(8.0));

  // perfect reconstruction, no regularization: exactly zero
  FactorModel fit = zero_model(2, 2, 1);
  fit.d = 1;
  fit.user_factors = DenseMatrix(2, 1);
  fit.item_factors = DenseMatrix(2, 1);
  fit.user_factors.at(0, 0) = 2.0;
  fit.item_factors.at(1, 0) = 2.0;
  CHECK(objective(fit, r, none, cfg) == 0.0);

  // identical user rows make the individual penalty vanish
  SimilarityMatrix s;
  s.object_type = "U";
  s.normalized = true;
  s.source = "x";
  s.s = CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
  RegularizationSpec reg;
  reg.user_mode = RegMode::Individual;
  reg.alpha = 5.0;
  reg.user_similarity = &s;
  FactorModel same = zero_model(2, 2, 2);
  same.user_factors.at(0, 0) = same.user_factors.at(1, 0) = 0.7;
  same.user_factors.at(0, 1) = same.user_factors.at(1, 1) = -0.2;
  CHECK(objective(same, r, reg, cfg) ==
        doctest::Approx(objective(same, r, none, cfg)).epsilon(1e-15));
}

TEST_CASE("shape mismatches and missing structures are rejected") {
  TrainConfig cfg;
  RatingMatrix r = single_rating(3.0);
  FactorModel wrong = zero_model(3, 2, 2);
  RegularizationSpec none;
  CHECK_THROWS_AS(objective(wrong, r, none, cfg), ValidationError);

  FactorModel ok = zero_model(2, 2, 2);
  RegularizationSpec avg;
  avg.user_mode = RegMode::Average;
  avg.alpha = 1.0;
  CHECK_THROWS_WITH_AS(grad_user(ok, r, avg, cfg), doctest::Contains("neighbor index"),
                       ValidationError);
  RegularizationSpec ind;
  ind.item_mode = RegMode::Individual;
  ind.beta = 1.0;
  CHECK_THROWS_WITH_AS(grad_item(ok, r, ind, cfg), doctest::Contains("similarity matrix"),
                       ValidationError);
}

TEST_CASE("with no user regularization the user gradient is the plain factorization one") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Instance in = random_instance(rng);
    TrainConfig cfg;
    cfg.lambda1 = 0.05;
    cfg.parallel = false;
    RegularizationSpec none;
    DenseMatrix g = grad_user(in.model, in.ratings, none, cfg);
    // direct evaluation of sum_j I_ij (U_i.V_j - R_ij) V_j + lambda1 U_i
    for (int i = 0; i < in.ratings.users; ++i)
      for (int k = 0; k < in.model.d; ++k) {
        double want = cfg.lambda1 * in.model.user_factors.at(i, k);
        for (const RatingEntry& e : in.ratings.entries) {
          if (e.user != i) continue;
          double err = -e.value;
          for (int kk = 0; kk < in.model.d; ++kk)
            err += in.model.user_factors.at(i, kk) * in.model.item_factors.at(e.item, kk);
          want += err * in.model.item_factors.at(e.item, k);
        }
        CHECK(g.at(i, k) == doctest::Approx(want).epsilon(1e-12));
      }
  }
}

TEST_CASE("analytic gradients match central finite differences in every mode pairing") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 45; ++trial) {
    Instance in = random_instance(rng);
    RegMode um = kModes[trial % 3];
    RegMode im = kModes[(trial / 3) % 3];
    RegularizationSpec reg = spec_for(in, um, im, 0.7, 1.3);
    TrainConfig cfg;
    cfg.lambda1 = 0.01;
    cfg.lambda2 = 0.02;
    cfg.parallel = false;

    DenseMatrix gu = grad_user(in.model, in.ratings, reg, cfg);
    DenseMatrix gv = grad_item(in.model, in.ratings, reg, cfg);
    oracles::FiniteDiff fd = oracles::finite_diff(in.model, in.ratings, reg, cfg);
    CHECK(oracles::max_rel_err(gu, fd.d_user) < 1e-4);
    CHECK(oracles::max_rel_err(gv, fd.d_item) < 1e-4);
    ++checked;
  }
  CHECK(checked == 45);
}

TEST_CASE("optimized gradients agree with the reference implementation") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 18; ++trial) {
    Instance in = random_instance(rng);
    RegularizationSpec reg = spec_for(in, kModes[trial % 3], kModes[(trial / 3) % 3], 0.9, 0.4);
    TrainConfig cfg;
    cfg.lambda1 = 0.01;
    cfg.lambda2 = 0.03;
    for (bool parallel : {false, true}) {
      cfg.parallel = parallel;
      CHECK(oracles::max_rel_err(grad_user(in.model, in.ratings, reg, cfg),
                                 reference::grad_user(in.model, in.ratings, reg, cfg)) < 1e-10);
      CHECK(oracles::max_rel_err(grad_item(in.model, in.ratings, reg, cfg),
                                 reference::grad_item(in.model, in.ratings, reg, cfg)) < 1e-10);
      CHECK(objective(in.model, in.ratings, reg, cfg) ==
            doctest::Approx(reference::objective(in.model, in.ratings, reg, cfg))
                .epsilon(1e-10));
    }
  }
}

TEST_CASE("identical rows zero out the individual term; self-average zeroes the average term") {
  std::mt19937_64 rng(9);
  Instance in = random_instance(rng);
  for (int k = 0; k < in.model.d; ++k) {
    double v = in.model.user_factors.at(0, k);
    for (int i = 1; i < in.ratings.users; ++i) in.model.user_factors.at(i, k) = v;
  }
  TrainConfig cfg;
  cfg.parallel = false;
  RegularizationSpec ind = spec_for(in, RegMode::Individual, RegMode::None, 3.0, 0.0);
  RegularizationSpec off = spec_for(in, RegMode::None, RegMode::None, 0.0, 0.0);
  DenseMatrix g_ind = grad_user(in.model, in.ratings, ind, cfg);
  DenseMatrix g_off = grad_user(in.model, in.ratings, off, cfg);
  CHECK(oracles::max_rel_err(g_ind, g_off) == 0.0);

  // with all rows equal, each neighbor average equals the row itself
  RegularizationSpec avg = spec_for(in, RegMode::Average, RegMode::None, 3.0, 0.0);
  DenseMatrix g_avg = grad_user(in.model, in.ratings, avg, cfg);
  CHECK(oracles::max_rel_err(g_avg, g_off) < 1e-14);

  // and the same on the item side
  for (int k = 0; k < in.model.d; ++k) {
    double v = in.model.item_factors.at(0, k);
    for (int j = 1; j < in.ratings.items; ++j) in.model.item_factors.at(j, k) = v;
  }
  RegularizationSpec item_avg = spec_for(in, RegMode::None, RegMode::Average, 0.0, 3.0);
  DenseMatrix gi_avg = grad_item(in.model, in.ratings, item_avg, cfg);
  DenseMatrix gi_off = grad_item(in.model, in.ratings, off, cfg);
  CHECK(oracles::max_rel_err(gi_avg, gi_off) < 1e-14);
}

TEST_CASE("objective reduction: switched-off sides ignore their structures") {
  std::mt19937_64 rng(41);
  Instance in = random_instance(rng);
  TrainConfig cfg;
  cfg.parallel = false;

  RegularizationSpec a = spec_for(in, RegMode::Average, RegMode::Individual, 0.0, 0.0);
  RegularizationSpec b = spec_for(in, RegMode::None, RegMode::None, 0.0, 0.0);
  CHECK(objective(in.model, in.ratings, a, cfg) == objective(in.model, in.ratings, b, cfg));

  // and alpha = beta = 0 equals a from-scratch evaluation of the plain objective
  double plain = 0.0;
  for (const RatingEntry& e : in.ratings.entries) {
    double err = -e.value;
    for (int k = 0; k < in.model.d; ++k)
      err += in.model.user_factors.at(e.user, k) * in.model.item_factors.at(e.item, k);
    plain += 0.5 * err * err;
  }
  for (double v : in.model.user_factors.data) plain += 0.5 * cfg.lambda1 * v * v;
  for (double v : in.model.item_factors.data) plain += 0.5 * cfg.lambda2 * v * v;
  CHECK(objective(in.model, in.ratings, b, cfg) == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("training descends monotonically and reports a trace") {
  std::mt19937_64 rng(70);
  Instance in = random_instance(rng);
  RegularizationSpec reg = spec_for(in, RegMode::Average, RegMode::Individual, 1.0, 1.0);
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.max_iters = 60;
  cfg.epsilon = 1e-12;
  cfg.parallel = false;
  TrainResult res = train(in.ratings, reg, cfg);
  REQUIRE(res.trace.size() > 2);
  for (size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].objective <= res.trace[i - 1].objective);
    CHECK(std::isfinite(res.trace[i].objective));
  }
  CHECK(all_finite(res.model.user_factors));
  CHECK(all_finite(res.model.item_factors));
}

TEST_CASE("training is bit-deterministic in single-threaded mode") {
  std::mt19937_64 rng(71);
  Instance in = random_instance(rng);
  RegularizationSpec reg = spec_for(in, RegMode::Individual, RegMode::Average, 0.5, 0.5);
  TrainConfig cfg;
  cfg.eta = 0.03;
  cfg.max_iters = 40;
  cfg.parallel = false;
  cfg.seed = 99;
  TrainResult a = train(in.ratings, reg, cfg);
  TrainResult b = train(in.ratings, reg, cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].objective == b.trace[i].objective);
    CHECK(a.trace[i].delta == b.trace[i].delta);
  }
  CHECK(a.model.user_factors == b.model.user_factors);
  CHECK(a.model.item_factors == b.model.item_factors);
}

TEST_CASE("parallel training stays within 1e-10 relative objective of serial") {
  std::mt19937_64 rng(72);
  RatingMatrix r = oracles::random_ratings(rng, 40, 30, 0.2);
  RegularizationSpec none;
  TrainConfig cfg;
  cfg.d = 4;
  cfg.eta = 0.01;
  cfg.max_iters = 25;
  cfg.seed = 5;
  cfg.parallel = false;
  TrainResult serial = train(r, none, cfg);
  cfg.parallel = true;
  TrainResult parallel = train(r, none, cfg);
  REQUIRE(serial.trace.size() == parallel.trace.size());
  for (size_t i = 0; i < serial.trace.size(); ++i) {
    double rel = std::abs(serial.trace[i].objective - parallel.trace[i].objective) /
                 std::max(1.0, std::abs(serial.trace[i].objective));
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("rank-one fully observed ratings are recovered to high precision") {
  RatingMatrix r;
  r.users = 6;
  r.items = 5;
  r.scale_min = 0.1;
  r.scale_max = 10.0;
  std::vector<double> u{0.6, 0.8, 1.0, 1.2, 1.4, 1.6};
  std::vector<double> v{0.5, 0.8, 1.1, 1.4, 1.7};
  for (int i = 0; i < r.users; ++i)
    for (int j = 0; j < r.items; ++j) r.entries.push_back({i, j, u[i] * v[j]});
  r.build_index();

  RegularizationSpec none;
  TrainConfig cfg;
  cfg.d = 1;
  cfg.eta = 0.05;
  cfg.lambda1 = cfg.lambda2 = 0.0;
  cfg.epsilon = 1e-16;
  cfg.max_iters = 4000;
  cfg.seed = 3;
  cfg.parallel = false;
  TrainResult res = train(r, none, cfg);

  double sq = 0.0;
  for (const RatingEntry& e : r.entries) {
    double err = predict(res.model, e.user, e.item) - e.value;
    sq += err * err;
  }
  double train_rmse = std::sqrt(sq / static_cast<double>(r.entries.size()));
  CHECK(train_rmse < 1e-3);
}

TEST_CASE("individual regularization pulls a ratingless user toward its neighbor") {
  RatingMatrix r;
  r.users = 2;
  r.items = 2;
  r.entries = {{0, 0, 5.0}, {0, 1, 1.0}};  // user 1 has no ratings
  r.build_index();
  SimilarityMatrix s;
  s.object_type = "U";
  s.normalized = true;
  s.source = "x";
  s.s = CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
  RegularizationSpec reg;
  reg.user_mode = RegMode::Individual;
  reg.alpha = 50.0;  // pull dominates the data term on user 0
  reg.user_similarity = &s;

  TrainConfig cfg;
  cfg.d = 2;
  cfg.eta = 0.002;
  cfg.seed = 11;
  cfg.parallel = false;
  cfg.epsilon = 1e-18;

  auto gap_after = [&](int iters) {
    TrainConfig c = cfg;
    c.max_iters = iters;
    TrainResult res = train(r, reg, c);
    double gap = 0.0;
    for (int k = 0; k < c.d; ++k) {
      double d = res.model.user_factors.at(0, k) - res.model.user_factors.at(1, k);
      gap += d * d;
    }
    return std::sqrt(gap);
  };
  double prev = gap_after(1);
  for (int iters : {2, 4, 8, 16, 32}) {
    double gap = gap_after(iters);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("plain-factorization trace matches the from-scratch implementation") {
  std::mt19937_64 rng(90);
  RatingMatrix r = oracles::random_ratings(rng, 7, 6, 0.5);
  RegularizationSpec none;
  TrainConfig cfg;
  cfg.d = 3;
  cfg.eta = 0.01;
  cfg.lambda1 = cfg.lambda2 = 0.001;
  cfg.epsilon = 1e-12;
  cfg.max_iters = 120;
  cfg.seed = 1234;
  cfg.step_halving = false;  // fixed-step descent on both sides
  cfg.parallel = false;
  TrainResult lib = train(r, none, cfg);

  oracles::PlainMfResult plain =
      oracles::plain_mf(r.entries, r.users, r.items, cfg.d, cfg.eta, cfg.lambda1, cfg.lambda2,
                        cfg.epsilon, cfg.max_iters, cfg.seed, cfg.init_scale);

  REQUIRE(lib.trace.size() <= plain.objectives.size());
  for (size_t i = 0; i < lib.trace.size(); ++i) {
    double diff = std::abs(lib.trace[i].objective - plain.objectives[i]);
    CHECK(diff <= 1e-12 * std::max(1.0, std::abs(plain.objectives[i])));
  }
}

TEST_CASE("divergence without step halving reports the last finite iterate") {
  std::mt19937_64 rng(91);
  RatingMatrix r = oracles::random_ratings(rng, 5, 5, 0.6);
  RegularizationSpec none;
  TrainConfig cfg;
  cfg.d = 2;
  cfg.eta = 50.0;  // guaranteed blow-up
  cfg.step_halving = false;
  cfg.max_iters = 200;
  cfg.parallel = false;
  try {
    train(r, none, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(all_finite(e.last_finite.user_factors));
    CHECK(all_finite(e.last_finite.item_factors));
  }
}

TEST_CASE("step halving survives an aggressive learning rate") {
  std::mt19937_64 rng(92);
  RatingMatrix r = oracles::random_ratings(rng, 5, 5, 0.6);
  RegularizationSpec none;
  TrainConfig cfg;
  cfg.d = 2;
  cfg.eta = 50.0;
  cfg.step_halving = true;
  cfg.max_iters = 30;
  cfg.parallel = false;
  TrainResult res = train(r, none, cfg);
  for (size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].objective <= res.trace[i - 1].objective);
  CHECK(all_finite(res.model.user_factors));
}

TEST_CASE("seeded init is reproducible with the documented distribution") {
  TrainConfig cfg;
  cfg.d = 8;
  cfg.seed = 424242;
  cfg.init_scale = 0.1;
  FactorModel a = init_model(50, 40, cfg);
  FactorModel b = init_model(50, 40, cfg);
  CHECK(a.user_factors == b.user_factors);
  CHECK(a.item_factors == b.item_factors);

  double mean = 0.0, sq = 0.0;
  for (double v : a.user_factors.data) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(a.user_factors.data.size());
  double sd = std::sqrt(sq / static_cast<double>(a.user_factors.data.size()) - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(sd == doctest::Approx(cfg.init_scale).epsilon(0.15));
}

TEST_CASE("checkpoints round-trip factors, config and checksum") {
  std::mt19937_64 rng(93);
  FactorModel m = oracles::random_model(rng, 9, 7, 3);
  TrainConfig cfg;
  cfg.d = 3;
  cfg.eta = 0.007;
  cfg.seed = 77;
  support::TempDir dir("ckpt");
  save_checkpoint(dir.file("model.bin"), m, cfg, 0xfeedbeef);
  Checkpoint back = load_checkpoint(dir.file("model.bin"));
  CHECK(back.model.user_factors == m.user_factors);
  CHECK(back.model.item_factors == m.item_factors);
  CHECK(back.cfg.eta == cfg.eta);
  CHECK(back.cfg.seed == cfg.seed);
  CHECK(back.dataset_checksum == 0xfeedbeef);
  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.bin")), DatasetError);
}
