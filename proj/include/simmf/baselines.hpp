#pragma once

#include "simmf/hin.hpp"
#include "simmf/mf.hpp"

namespace simmf {

enum class MeanKind { User, Item };

/// Per-object mean-rating predictor with a global-mean fallback for objects
/// unseen in training.
struct MeanModel {
  MeanKind kind = MeanKind::User;
  std::vector<double> means;
  std::vector<char> has;  // object had at least one training rating
  double global_mean = 0.0;

  double predict(int user, int item) const {
    int o = kind == MeanKind::User ? user : item;
    return has[o] ? means[o] : global_mean;
  }
};

MeanModel fit_mean(const RatingMatrix& train, MeanKind kind);

// Plain low-rank factorization: train() with both regularization sides off.
TrainResult pmf_preset(const RatingMatrix& train, TrainConfig cfg);

struct SomfOptions {
  double alpha = 10.0;
  int k = 0;               // 0: derive from fraction
  double k_fraction = 0.05;
  double norm_beta = 1.0;
};

// Social matrix factorization: average-based user regularization over the
// user-user relation's similarity, no item regularization. Errors with
// NotApplicableError when the dataset has no user-user relation.
TrainResult somf_preset(const HinDataset& ds, const RatingMatrix& train, TrainConfig cfg,
                        SomfOptions opts = {});

}  // namespace simmf
