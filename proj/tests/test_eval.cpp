#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "simmf/errors.hpp"
#include "simmf/eval.hpp"
#include "support.hpp"

using namespace simmf;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("split produces the requested sizes deterministically") {
  std::mt19937_64 rng(1);
  RatingMatrix r = oracles::random_ratings(rng, 25, 20, 0.2);
  while (r.count() > 100) r.entries.pop_back();
  while (r.count() < 100)
    r.entries.push_back({static_cast<int>(rng() % 25), static_cast<int>(rng() % 20),
                         static_cast<double>(1 + rng() % 5)});
  std::sort(r.entries.begin(), r.entries.end(), [](const RatingEntry& a, const RatingEntry& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  r.entries.erase(std::unique(r.entries.begin(), r.entries.end(),
                              [](const RatingEntry& a, const RatingEntry& b) {
                                return a.user == b.user && a.item == b.item;
                              }),
                  r.entries.end());
  while (r.count() < 100) {
    int u = static_cast<int>(rng() % 25), i = static_cast<int>(rng() % 20);
    bool dup = false;
    for (const RatingEntry& e : r.entries) dup |= (e.user == u && e.item == i);
    if (!dup) r.entries.push_back({u, i, 3.0});
  }
  r.build_index();
  REQUIRE(r.count() == 100);

  SplitSpec spec{0.8, 10, 77};
  auto [train, test] = split(r, spec, 3);
  CHECK(train.count() == 80);
  CHECK(test.count() == 20);

  auto [train2, test2] = split(r, spec, 3);
  CHECK(train.entries.size() == train2.entries.size());
  CHECK(std::equal(train.entries.begin(), train.entries.end(), train2.entries.begin(),
                   [](const RatingEntry& a, const RatingEntry& b) {
                     return a.user == b.user && a.item == b.item && a.value == b.value;
                   }));

  auto [train3, test3] = split(r, spec, 4);  // different trial, different partition
  bool same = train.count() == train3.count() &&
              std::equal(train.entries.begin(), train.entries.end(), train3.entries.begin(),
                         [](const RatingEntry& a, const RatingEntry& b) {
                           return a.user == b.user && a.item == b.item;
                         });
  CHECK_FALSE(same);
}

TEST_CASE("split partitions: disjoint union over 100 random specs") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    RatingMatrix r = oracles::random_ratings(rng, 4 + static_cast<int>(rng() % 10),
                                             4 + static_cast<int>(rng() % 10), 0.5);
    SplitSpec spec{0.1 + 0.8 * static_cast<double>(rng() % 100) / 100.0, 3, rng()};
    auto [train, test] = split(r, spec, static_cast<int>(rng() % 3));
    CHECK(train.count() + test.count() == r.count());
    std::set<std::pair<int, int>> seen;
    for (const RatingEntry& e : train.entries) seen.insert({e.user, e.item});
    for (const RatingEntry& e : test.entries) {
      CHECK(seen.insert({e.user, e.item}).second);  // disjoint
    }
    CHECK(seen.size() == static_cast<size_t>(r.count()));
    CHECK(train.count() >= 1);
    CHECK(test.count() >= 1);
  }
}

TEST_CASE("split validates its inputs") {
  RatingMatrix r;
  r.users = r.items = 2;
  r.entries = {{0, 0, 3}, {1, 1, 4}};
  r.build_index();
  CHECK_THROWS_AS(split(r, {1.2, 3, 1}, 0), ConfigError);
  CHECK_THROWS_AS(split(r, {0.0, 3, 1}, 0), ConfigError);
  CHECK_THROWS_AS(split(r, {0.5, 3, 1}, 3), ConfigError);
}

TEST_CASE("error metrics on hand-evaluated cases") {
  RatingMatrix test;
  test.users = test.items = 2;
  test.entries = {{0, 0, 3.0}, {1, 1, 4.0}};
  test.build_index();

  std::vector<double> perfect{3.0, 4.0};
  CHECK(mae(perfect, test) == 0.0);
  CHECK(rmse(perfect, test) == 0.0);

  std::vector<double> off_one{4.0, 3.0};  // errors {1, -1}
  CHECK(mae(off_one, test) == doctest::Approx(1.0));
  CHECK(rmse(off_one, test) == doctest::Approx(1.0));

  std::vector<double> skewed{3.0, 2.0};  // errors {0, 2}
  CHECK(mae(skewed, test) == doctest::Approx(1.0));
  CHECK(rmse(skewed, test) == doctest::Approx(std::sqrt(2.0)));

  RatingMatrix empty;
  empty.users = empty.items = 1;
  CHECK_THROWS_AS(mae({}, empty), ValidationError);
  CHECK_THROWS_AS(rmse({}, empty), ValidationError);
  CHECK_THROWS_AS(mae(perfect, empty), ValidationError);
}

TEST_CASE("rmse dominates mae on every random trial") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    RatingMatrix test = oracles::random_ratings(rng, 6, 6, 0.5);
    std::vector<double> preds;
    for (const RatingEntry& e : test.entries)
      preds.push_back(e.value + (static_cast<double>(rng() % 500) - 250.0) / 100.0);
    CHECK(rmse(preds, test) >= mae(preds, test) - 1e-15);
  }
}

TEST_CASE("clamped predictions respect the rating scale") {
  RatingMatrix test;
  test.users = test.items = 2;
  test.scale_min = 1;
  test.scale_max = 5;
  test.entries = {{0, 0, 3.0}, {1, 1, 4.0}};
  test.build_index();
  std::vector<double> p = clamped_predictions([](int, int) { return 99.0; }, test);
  CHECK(p[0] == 5.0);
  p = clamped_predictions([](int, int) { return -2.0; }, test);
  CHECK(p[1] == 1.0);
}

TEST_CASE("paired t-test: identity, degenerate shift, table value, symmetry") {
  std::vector<double> a{0.8, 0.9, 1.0};
  TTestResult same = paired_ttest(a, a);
  CHECK(same.p == 1.0);

  std::vector<double> shifted{0.9, 1.0, 1.1};
  TTestResult degen = paired_ttest(shifted, a);
  CHECK(degen.p == 0.0);
  CHECK(degen.degenerate);

  // diffs {1,1,4}: t = 2, dof = 2; closed form p = 1 - t/sqrt(2+t^2)
  std::vector<double> x{1.0, 1.0, 4.0};
  std::vector<double> zero{0.0, 0.0, 0.0};
  TTestResult table = paired_ttest(x, zero);
  CHECK(table.t == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(table.dof == 2);
  CHECK(table.p == doctest::Approx(1.0 - 2.0 / std::sqrt(6.0)).epsilon(1e-10));
  CHECK_FALSE(table.degenerate);

  TTestResult swapped = paired_ttest(zero, x);
  CHECK(swapped.p == doctest::Approx(table.p).epsilon(1e-12));

  CHECK_THROWS_AS(paired_ttest(std::vector<double>{1.0}, std::vector<double>{2.0}),
                  ValidationError);
  CHECK_THROWS_AS(paired_ttest(a, std::vector<double>{1.0, 2.0}), ValidationError);
}

TEST_CASE("path weighting by error: worked example, identity, equivariance") {
  std::vector<double> single{0.7};
  CHECK(heuristic_weights(single) == std::vector<double>{1.0});

  std::vector<double> equal{0.6, 0.6, 0.6};
  for (double w : heuristic_weights(equal)) CHECK(w == doctest::Approx(1.0 / 3.0));

  std::vector<double> pair{0.62, 0.64};
  std::vector<double> w = heuristic_weights(pair);
  CHECK(w[0] == doctest::Approx(0.5050).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(0.4950).epsilon(1e-4));
  CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w[0] > w[1]);  // smaller error, larger weight

  // permutation equivariance
  std::mt19937_64 rng(5);
  std::vector<double> maes{0.61, 0.72, 0.55, 0.68};
  std::vector<double> base = heuristic_weights(maes);
  std::vector<size_t> perm{2, 0, 3, 1};
  std::vector<double> permuted_in(4), expect(4);
  for (size_t i = 0; i < 4; ++i) {
    permuted_in[i] = maes[perm[i]];
    expect[i] = base[perm[i]];
  }
  std::vector<double> got = heuristic_weights(permuted_in);
  for (size_t i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));

  CHECK_THROWS_AS(heuristic_weights({}), ValidationError);
  CHECK_THROWS_AS(heuristic_weights(std::vector<double>{0.5, std::nan("")}), ValidationError);

  // strictly decreasing in the error
  std::vector<double> sorted_maes{0.5, 0.6, 0.7, 0.9};
  std::vector<double> sw = heuristic_weights(sorted_maes);
  for (size_t i = 1; i < sw.size(); ++i) CHECK(sw[i] < sw[i - 1]);
}

TEST_CASE("report summary: improvement percentages, p-values, formatting") {
  EvalReport rep;
  for (int trial = 0; trial < 3; ++trial) {
    rep.rows.push_back({"pmf", 0.8, trial, 0.7902 + 0.001 * trial, 1.0111 + 0.001 * trial, 1.0});
    rep.rows.push_back(
        {"simmf-uaii", 0.8, trial, 0.7289 + 0.001 * trial, 0.9215 + 0.001 * trial, 2.0});
    rep.rows.push_back({"usermean", 0.8, trial, 0.8439 + 0.001 * trial, 1.0594, 0.1});
  }

  std::vector<MethodSummary> sums = rep.summarize("pmf");
  REQUIRE(sums.size() == 3);
  const MethodSummary* base = nullptr;
  const MethodSummary* better = nullptr;
  const MethodSummary* worse = nullptr;
  for (const MethodSummary& s : sums) {
    if (s.method == "pmf") base = &s;
    if (s.method == "simmf-uaii") better = &s;
    if (s.method == "usermean") worse = &s;
  }
  REQUIRE((base && better && worse));
  CHECK(base->mae_improve_pct == doctest::Approx(0.0));
  // means: 0.7912 vs 0.7299 -> (0.7912-0.7299)/0.7912*100
  CHECK(better->mae_improve_pct ==
        doctest::Approx((0.7912 - 0.7299) / 0.7912 * 100.0).epsilon(1e-9));
  CHECK(worse->mae_improve_pct < 0.0);  // worse than baseline keeps the sign
  CHECK(better->mae_p < 0.05);          // constant offset: degenerate, p -> 0
  CHECK(better->p_degenerate);
  CHECK_FALSE(base->p_degenerate);      // baseline against itself is not flagged
  CHECK(better->seconds_total == doctest::Approx(6.0));

  CHECK_THROWS_WITH_AS(rep.summarize("nope"), doctest::Contains("baseline"), ValidationError);

  std::string table = report_summary(rep, "pmf");
  CHECK(table.find("simmf-uaii") != std::string::npos);

  support::TempDir dir("report");
  rep.write_trials_csv(dir.file("trials.csv"));
  rep.write_summary_csv(dir.file("summary.csv"), "pmf");
  rep.write_long_csv(dir.file("long.csv"));

  std::string trials = slurp(dir.file("trials.csv"));
  CHECK(trials.find("method,ratio,trial,mae,rmse") == 0);
  int lines = static_cast<int>(std::count(trials.begin(), trials.end(), '\n'));
  CHECK(lines == 1 + 9);  // header + |methods| * |ratios| * trials

  // byte-identical on rewrite
  rep.write_summary_csv(dir.file("summary2.csv"), "pmf");
  CHECK(slurp(dir.file("summary.csv")) == slurp(dir.file("summary2.csv")));

  std::string longcsv = slurp(dir.file("long.csv"));
  CHECK(std::count(longcsv.begin(), longcsv.end(), '\n') == 1 + 18);  // two metrics per row
}
