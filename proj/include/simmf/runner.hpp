#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simmf/eval.hpp"
#include "simmf/hin.hpp"
#include "simmf/mf.hpp"

namespace simmf {

/// A method label as it appears in configs and CSV output.
/// Factor variants encode their regularization in the label:
///   pmf, somf, usermean, itemmean,
///   simmf-u<a|i>, simmf-i<a|i>, simmf-u<a|i>i<a|i>   (a=average, i=individual)
/// Sweep runs append "@a<alpha>_b<beta>" (underscore keeps labels CSV-safe).
struct MethodSpec {
  enum class Kind { UserMean, ItemMean, Pmf, Somf, Simmf };
  Kind kind = Kind::Pmf;
  RegMode user_mode = RegMode::None;
  RegMode item_mode = RegMode::None;
  std::optional<double> alpha;  // label-pinned override (sweeps)
  std::optional<double> beta;
  std::string label;

  static MethodSpec parse(const std::string& label);
};

enum class WeightRule { Equal, Heuristic, Explicit };
enum class IndividualSupport { TopK, Full };

struct ExperimentConfig {
  std::string dataset_dir;
  std::string out_dir = "results";
  std::string cache_dir;  // empty: <out>/simcache; SIMMF_CACHE_DIR overrides
  std::vector<std::string> methods = {"pmf"};
  std::vector<double> ratios = {0.8};
  int trials = 10;
  std::uint64_t seed = 42;
  double alpha = 10.0;
  double beta = 10.0;
  std::vector<double> alpha_grid;  // non-empty: sweep simmf methods over the grid
  std::vector<double> beta_grid;
  std::vector<std::string> paths_user;
  std::vector<std::string> paths_item;
  WeightRule weight_rule = WeightRule::Equal;
  std::vector<double> weights_user;  // explicit rule only
  std::vector<double> weights_item;
  double neighbor_fraction = 0.05;
  int neighbor_k = 0;  // >0 overrides the fraction
  IndividualSupport individual_support = IndividualSupport::TopK;
  double prune = 0.0;       // commuting-matrix pruning threshold
  // Split-dependent similarities (paths through the rating relation) are
  // unique per (seed, ratio, trial); caching them only pays off when the
  // exact same run is repeated, at considerable disk cost.
  bool cache_split_dependent = false;
  double norm_beta = 1.0;   // sigmoid steepness for similarity normalization
  std::string baseline = "pmf";
  TrainConfig train;
  bool deterministic = false;

  static ExperimentConfig from_json_file(const std::string& path);
};

// Parses --weights values: "equal", "heuristic" or "explicit:w1,w2,..."
// (user-path weights first, then item-path weights).
void apply_weights_option(ExperimentConfig& cfg, const std::string& value);

// Runs the full (method x ratio x trial) grid: split, compute or restore
// similarities, train, evaluate. Writes trials.csv / summary.csv / long.csv,
// per-run convergence traces and the similarity cache under cfg.out_dir.
// On failure, partial results stay on disk and status.txt records the
// offending (method, ratio, trial).
EvalReport run_experiment(const ExperimentConfig& cfg);

// Trains one factor method (pmf, somf, simmf-*) and returns the result plus
// the dataset checksum for checkpointing. ratio in (0,1) trains on that
// split's training part; ratio <= 0 trains on all ratings.
struct SingleTrain {
  TrainResult result;
  std::uint64_t dataset_checksum = 0;
};
SingleTrain train_single(const ExperimentConfig& cfg, const std::string& method, double ratio,
                         int trial);

// MovieLens-1M raw files (ratings.dat, users.dat, movies.dat) -> dataset dir.
// subsample > 0 keeps that many ratings, drawn uniformly with the given seed.
void convert_movielens(const std::string& raw_dir, const std::string& out_dir,
                       std::int64_t subsample = 0, std::uint64_t seed = 7);

}  // namespace simmf
