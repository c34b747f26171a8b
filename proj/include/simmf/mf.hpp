#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "simmf/dense.hpp"
#include "simmf/hin.hpp"
#include "simmf/metapath.hpp"

namespace simmf {

/// Latent factors: one d-vector per user and per item.
struct FactorModel {
  int d = 0;
  DenseMatrix user_factors;  // m x d
  DenseMatrix item_factors;  // n x d
};

enum class RegMode { None, Average, Individual };

std::string to_string(RegMode m);

/// Which similarity regularization applies on each side and with what weight.
/// Average mode needs a NeighborIndex, individual mode a SimilarityMatrix.
struct RegularizationSpec {
  RegMode user_mode = RegMode::None;
  RegMode item_mode = RegMode::None;
  double alpha = 0.0;  // user-side weight
  double beta = 0.0;   // item-side weight
  const NeighborIndex* user_neighbors = nullptr;
  const SimilarityMatrix* user_similarity = nullptr;
  const NeighborIndex* item_neighbors = nullptr;
  const SimilarityMatrix* item_similarity = nullptr;
};

struct TrainConfig {
  int d = 10;
  double eta = 0.005;       // learning rate
  double lambda1 = 0.001;   // ridge on user factors
  double lambda2 = 0.001;   // ridge on item factors
  double epsilon = 1e-4;    // convergence tolerance on the step delta
  int max_iters = 500;
  std::uint64_t seed = 1;
  double init_scale = 0.1;  // stddev of the Gaussian factor init
  bool step_halving = true;
  bool parallel = true;     // false = deterministic single-threaded reference path
};

double predict(const FactorModel& model, int user, int item);

double objective(const FactorModel& model, const RatingMatrix& ratings,
                 const RegularizationSpec& reg, const TrainConfig& cfg);
DenseMatrix grad_user(const FactorModel& model, const RatingMatrix& ratings,
                      const RegularizationSpec& reg, const TrainConfig& cfg);
DenseMatrix grad_item(const FactorModel& model, const RatingMatrix& ratings,
                      const RegularizationSpec& reg, const TrainConfig& cfg);

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double delta = 0.0;  // ||U - U_old||^2 + ||V - V_old||^2
  double eta = 0.0;    // step size actually taken
};

struct TrainResult {
  FactorModel model;
  std::vector<TraceRow> trace;
  bool converged = false;
  std::string stop_reason;  // "converged" | "max_iters" | "stalled"
};

// Thrown only with step halving disabled, when the objective leaves the
// finite range; carries the last finite iterate.
struct DivergenceError : std::runtime_error {
  DivergenceError(std::string msg, FactorModel last)
      : std::runtime_error(std::move(msg)), last_finite(std::move(last)) {}
  FactorModel last_finite;
};

// Full-batch gradient descent with simultaneous U/V updates. Stops when the
// squared step delta drops below epsilon or max_iters is hit. When a step
// would increase the objective the step size is halved for that step (up to
// 20 times), keeping the recorded objective sequence non-increasing.
TrainResult train(const RatingMatrix& ratings, const RegularizationSpec& reg,
                  const TrainConfig& cfg);

// Gaussian init, fully pinned down (mt19937_64 + Box-Muller) so a seed means
// the same matrices on every platform. Fills U row-major, then V.
FactorModel init_model(int users, int items, const TrainConfig& cfg);

// Portable N(0,1) draw used by init_model.
double gaussian(std::mt19937_64& rng);

// --- checkpoints -------------------------------------------------------------

void save_checkpoint(const std::string& path, const FactorModel& model, const TrainConfig& cfg,
                     std::uint64_t dataset_checksum);
struct Checkpoint {
  FactorModel model;
  TrainConfig cfg;
  std::uint64_t dataset_checksum = 0;
};
Checkpoint load_checkpoint(const std::string& path);

namespace reference {
// Straight-line single-threaded evaluation of the training objective and its
// gradients, written as plain nested loops. Kept as the test oracle and the
// benchmark baseline for the tuned kernels.
double objective(const FactorModel& model, const RatingMatrix& ratings,
                 const RegularizationSpec& reg, const TrainConfig& cfg);
DenseMatrix grad_user(const FactorModel& model, const RatingMatrix& ratings,
                      const RegularizationSpec& reg, const TrainConfig& cfg);
DenseMatrix grad_item(const FactorModel& model, const RatingMatrix& ratings,
                      const RegularizationSpec& reg, const TrainConfig& cfg);
}  // namespace reference

}  // namespace simmf
