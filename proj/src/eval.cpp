#include "simmf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "simmf/errors.hpp"

namespace simmf {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 on seed xor salt
  std::uint64_t z = seed ^ (salt * 0x9e3779b97f4a7c15ULL) ^ 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::int64_t> shuffled_indices(std::int64_t n, std::uint64_t seed) {
  std::vector<std::int64_t> idx(static_cast<size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::int64_t i = n - 1; i > 0; --i) {
    std::int64_t j = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

std::pair<RatingMatrix, RatingMatrix> split(const RatingMatrix& ratings, const SplitSpec& spec,
                                            int trial) {
  if (!(spec.train_ratio > 0.0 && spec.train_ratio < 1.0))
    throw ConfigError("train ratio must lie in (0,1), got " + std::to_string(spec.train_ratio));
  if (trial < 0 || trial >= spec.trial_count)
    throw ConfigError("trial index " + std::to_string(trial) + " outside trial count " +
                      std::to_string(spec.trial_count));
  std::int64_t n = ratings.count();
  std::vector<std::int64_t> order = shuffled_indices(n, mix_seed(spec.seed, trial + 1));
  auto n_train = static_cast<std::int64_t>(std::llround(spec.train_ratio * static_cast<double>(n)));
  n_train = std::max<std::int64_t>(1, std::min(n - 1, n_train));

  RatingMatrix train, test;
  for (RatingMatrix* part : {&train, &test}) {
    part->users = ratings.users;
    part->items = ratings.items;
    part->scale_min = ratings.scale_min;
    part->scale_max = ratings.scale_max;
  }
  train.entries.reserve(n_train);
  test.entries.reserve(n - n_train);
  for (std::int64_t p = 0; p < n; ++p)
    (p < n_train ? train : test).entries.push_back(ratings.entries[order[p]]);
  train.build_index();
  test.build_index();
  return {std::move(train), std::move(test)};
}

double mae(std::span<const double> predictions, const RatingMatrix& test) {
  if (test.entries.empty()) throw ValidationError("mae: empty test set");
  if (predictions.size() != test.entries.size())
    throw ValidationError("mae: predictions do not cover the test set");
  double acc = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i)
    acc += std::abs(test.entries[i].value - predictions[i]);
  return acc / static_cast<double>(predictions.size());
}

double rmse(std::span<const double> predictions, const RatingMatrix& test) {
  if (test.entries.empty()) throw ValidationError("rmse: empty test set");
  if (predictions.size() != test.entries.size())
    throw ValidationError("rmse: predictions do not cover the test set");
  double acc = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    double e = test.entries[i].value - predictions[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(predictions.size()));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("t-test: unequal trial counts");
  if (a.size() < 2) throw ValidationError("t-test: need at least 2 trials");
  size_t n = a.size();
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = (a[i] - b[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);

  TTestResult r;
  r.dof = static_cast<int>(n) - 1;
  // Zero-variance differences: identical vectors mean p = 1, a constant
  // nonzero shift drives p to 0. The relative cutoff absorbs float rounding
  // in differences that are constant on paper.
  if (var == 0.0 || std::sqrt(var) <= 1e-12 * std::abs(mean)) {
    r.degenerate = mean != 0.0;
    r.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    r.p = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  boost::math::students_t dist(static_cast<double>(r.dof));
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

std::vector<double> heuristic_weights(std::span<const double> per_path_mae) {
  if (per_path_mae.empty()) throw ValidationError("heuristic weights: empty MAE list");
  for (double m : per_path_mae)
    if (!std::isfinite(m)) throw ValidationError("heuristic weights: non-finite MAE");
  double worst = *std::max_element(per_path_mae.begin(), per_path_mae.end());
  std::vector<double> w(per_path_mae.size());
  double sum = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(worst - per_path_mae[i]);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

// --- reporting ----------------------------------------------------------------

std::vector<double> EvalReport::metric_series(const std::string& method, double ratio,
                                              bool use_rmse) const {
  std::map<int, double> by_trial;
  for (const TrialRow& r : rows)
    if (r.method == method && r.ratio == ratio) by_trial[r.trial] = use_rmse ? r.rmse : r.mae;
  std::vector<double> out;
  out.reserve(by_trial.size());
  for (const auto& [trial, v] : by_trial) out.push_back(v);
  return out;
}

std::vector<MethodSummary> EvalReport::summarize(const std::string& baseline) const {
  bool baseline_seen = false;
  for (const TrialRow& r : rows)
    if (r.method == baseline) baseline_seen = true;
  if (!baseline_seen)
    throw ValidationError("summary: baseline method '" + baseline + "' not present in report");

  // preserve first-appearance order of methods and ratios
  std::vector<std::string> methods;
  std::vector<double> ratios;
  for (const TrialRow& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
    if (std::find(ratios.begin(), ratios.end(), r.ratio) == ratios.end())
      ratios.push_back(r.ratio);
  }

  std::vector<MethodSummary> out;
  for (double ratio : ratios) {
    std::vector<double> base_mae = metric_series(baseline, ratio, false);
    std::vector<double> base_rmse = metric_series(baseline, ratio, true);
    double base_mae_mean = 0.0, base_rmse_mean = 0.0;
    for (double v : base_mae) base_mae_mean += v;
    for (double v : base_rmse) base_rmse_mean += v;
    if (!base_mae.empty()) base_mae_mean /= static_cast<double>(base_mae.size());
    if (!base_rmse.empty()) base_rmse_mean /= static_cast<double>(base_rmse.size());

    for (const std::string& method : methods) {
      std::vector<double> ms = metric_series(method, ratio, false);
      std::vector<double> rs = metric_series(method, ratio, true);
      if (ms.empty()) continue;
      MethodSummary s;
      s.method = method;
      s.ratio = ratio;
      s.trials = static_cast<int>(ms.size());
      for (double v : ms) s.mae_mean += v;
      for (double v : rs) s.rmse_mean += v;
      s.mae_mean /= static_cast<double>(ms.size());
      s.rmse_mean /= static_cast<double>(rs.size());
      if (base_mae_mean > 0.0) s.mae_improve_pct = (base_mae_mean - s.mae_mean) / base_mae_mean * 100.0;
      if (base_rmse_mean > 0.0)
        s.rmse_improve_pct = (base_rmse_mean - s.rmse_mean) / base_rmse_mean * 100.0;
      if (ms.size() >= 2 && ms.size() == base_mae.size()) {
        TTestResult tm = paired_ttest(ms, base_mae);
        TTestResult tr = paired_ttest(rs, base_rmse);
        s.mae_p = tm.p;
        s.rmse_p = tr.p;
        s.p_degenerate = tm.degenerate || tr.degenerate;
      }
      for (const TrialRow& r : rows)
        if (r.method == method && r.ratio == ratio) s.seconds_total += r.seconds;
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string fmt_sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4e", v);
  return buf;
}

}  // namespace

void EvalReport::write_trials_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path);
  out << "method,ratio,trial,mae,rmse\n";
  for (const TrialRow& r : rows)
    out << r.method << ',' << fmt(r.ratio, 2) << ',' << r.trial << ',' << fmt(r.mae) << ','
        << fmt(r.rmse) << '\n';
}

void EvalReport::write_long_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path);
  out << "method,ratio,trial,metric,value\n";
  for (const TrialRow& r : rows) {
    out << r.method << ',' << fmt(r.ratio, 2) << ',' << r.trial << ",mae," << fmt(r.mae) << '\n';
    out << r.method << ',' << fmt(r.ratio, 2) << ',' << r.trial << ",rmse," << fmt(r.rmse)
        << '\n';
  }
}

void EvalReport::write_summary_csv(const std::string& path, const std::string& baseline) const {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path);
  // wall-clock timing lives in cells.csv so reruns stay byte-identical here
  out << "method,ratio,trials,mae_mean,rmse_mean,mae_improve_pct,rmse_improve_pct,"
         "mae_p_vs_" << baseline << ",rmse_p_vs_" << baseline << ",p_degenerate\n";
  for (const MethodSummary& s : summarize(baseline))
    out << s.method << ',' << fmt(s.ratio, 2) << ',' << s.trials << ',' << fmt(s.mae_mean) << ','
        << fmt(s.rmse_mean) << ',' << fmt(s.mae_improve_pct, 2) << ','
        << fmt(s.rmse_improve_pct, 2) << ',' << fmt_sci(s.mae_p) << ',' << fmt_sci(s.rmse_p)
        << ',' << (s.p_degenerate ? 1 : 0) << '\n';
}

void EvalReport::write_cells_csv(const std::string& path, const std::string& baseline) const {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path);
  out << "method,ratio,trials,wall_seconds\n";
  for (const MethodSummary& s : summarize(baseline))
    out << s.method << ',' << fmt(s.ratio, 2) << ',' << s.trials << ','
        << fmt(s.seconds_total, 3) << '\n';
}

std::string report_summary(const EvalReport& report, const std::string& baseline) {
  std::ostringstream out;
  out << "method               ratio  trials  MAE       RMSE      impr(MAE)  impr(RMSE)  "
         "p(MAE)      p(RMSE)\n";
  for (const MethodSummary& s : report.summarize(baseline)) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-20s %-6.2f %-7d %-9.4f %-9.4f %+-10.2f %+-11.2f %-11.3e %-11.3e%s\n",
                  s.method.c_str(), s.ratio, s.trials, s.mae_mean, s.rmse_mean, s.mae_improve_pct,
                  s.rmse_improve_pct, s.mae_p, s.rmse_p, s.p_degenerate ? "  (degenerate)" : "");
    out << line;
  }
  return out.str();
}

}  // namespace simmf
