#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simmf/hin.hpp"

namespace simmf {

struct SplitSpec {
  double train_ratio = 0.8;  // in (0,1)
  int trial_count = 10;
  std::uint64_t seed = 0;
};

// Uniform random partition of rating entries, deterministic per (seed, trial).
// Train and test are disjoint and together cover every entry.
std::pair<RatingMatrix, RatingMatrix> split(const RatingMatrix& ratings, const SplitSpec& spec,
                                            int trial);

// Fully specified Fisher-Yates shuffle (no implementation-defined
// distributions), shared by split() and the dataset subsampler.
std::vector<std::int64_t> shuffled_indices(std::int64_t n, std::uint64_t seed);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

double mae(std::span<const double> predictions, const RatingMatrix& test);
double rmse(std::span<const double> predictions, const RatingMatrix& test);

// Predictions for every test entry, clamped to the rating scale.
template <typename Predict>
std::vector<double> clamped_predictions(Predict&& predict, const RatingMatrix& test) {
  std::vector<double> out;
  out.reserve(test.entries.size());
  for (const RatingEntry& e : test.entries) out.push_back(test.clamp(predict(e.user, e.item)));
  return out;
}

struct TTestResult {
  double p = 1.0;
  double t = 0.0;
  int dof = 0;
  bool degenerate = false;  // zero-variance differences
};

// Two-tailed paired t-test on per-trial score differences.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

// Exponential weighting of paths by their standalone error: a path with MAE
// p_l gets weight exp(p_max - p_l) / sum, so better paths weigh more.
std::vector<double> heuristic_weights(std::span<const double> per_path_mae);

// --- reporting ----------------------------------------------------------------

struct TrialRow {
  std::string method;
  double ratio = 0.0;
  int trial = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double seconds = 0.0;  // train+evaluate wall clock for this trial
};

struct MethodSummary {
  std::string method;
  double ratio = 0.0;
  int trials = 0;
  double mae_mean = 0.0;
  double rmse_mean = 0.0;
  double mae_improve_pct = 0.0;   // vs baseline, (base - x) / base * 100
  double rmse_improve_pct = 0.0;
  double mae_p = 1.0;             // paired t-test vs baseline
  double rmse_p = 1.0;
  bool p_degenerate = false;
  double seconds_total = 0.0;     // wall clock of the whole (method, ratio) cell
};

struct EvalReport {
  std::vector<TrialRow> rows;

  std::vector<double> metric_series(const std::string& method, double ratio, bool use_rmse) const;
  std::vector<MethodSummary> summarize(const std::string& baseline) const;

  void write_trials_csv(const std::string& path) const;
  void write_long_csv(const std::string& path) const;
  void write_summary_csv(const std::string& path, const std::string& baseline) const;
  void write_cells_csv(const std::string& path, const std::string& baseline) const;
};

// Human-readable table with per-method means, improvement over the baseline,
// and p-values. Throws on an unknown baseline name.
std::string report_summary(const EvalReport& report, const std::string& baseline);

}  // namespace simmf
