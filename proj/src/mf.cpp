#include "simmf/mf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "simmf/errors.hpp"

namespace simmf {

std::string to_string(RegMode m) {
  switch (m) {
    case RegMode::None: return "none";
    case RegMode::Average: return "average";
    case RegMode::Individual: return "individual";
  }
  return "?";
}

double frobenius_sq(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return s;
}

double frobenius_sq_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s;
}

bool all_finite(const DenseMatrix& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

double predict(const FactorModel& model, int user, int item) {
  if (user < 0 || user >= model.user_factors.rows)
    throw std::out_of_range("predict: user index " + std::to_string(user) + " out of range");
  if (item < 0 || item >= model.item_factors.rows)
    throw std::out_of_range("predict: item index " + std::to_string(item) + " out of range");
  const double* u = model.user_factors.row(user);
  const double* v = model.item_factors.row(item);
  double s = 0.0;
  for (int k = 0; k < model.d; ++k) s += u[k] * v[k];
  return s;
}

namespace {

void validate_shapes(const FactorModel& model, const RatingMatrix& ratings,
                     const RegularizationSpec& reg) {
  if (model.user_factors.rows != ratings.users || model.item_factors.rows != ratings.items ||
      model.user_factors.cols != model.d || model.item_factors.cols != model.d)
    throw ValidationError("factor model shape does not match ratings (" +
                          std::to_string(model.user_factors.rows) + "x" +
                          std::to_string(model.d) + " / " +
                          std::to_string(model.item_factors.rows) + "x" +
                          std::to_string(model.d) + " vs " + std::to_string(ratings.users) +
                          " users, " + std::to_string(ratings.items) + " items)");
  if (reg.user_mode == RegMode::Average &&
      (!reg.user_neighbors || reg.user_neighbors->size() != ratings.users))
    throw ValidationError("average user regularization requires a user neighbor index");
  if (reg.user_mode == RegMode::Individual &&
      (!reg.user_similarity || reg.user_similarity->s.rows != ratings.users ||
       reg.user_similarity->s.cols != ratings.users))
    throw ValidationError("individual user regularization requires a user similarity matrix");
  if (reg.item_mode == RegMode::Average &&
      (!reg.item_neighbors || reg.item_neighbors->size() != ratings.items))
    throw ValidationError("average item regularization requires an item neighbor index");
  if (reg.item_mode == RegMode::Individual &&
      (!reg.item_similarity || reg.item_similarity->s.rows != ratings.items ||
       reg.item_similarity->s.cols != ratings.items))
    throw ValidationError("individual item regularization requires an item similarity matrix");
}

// Weighted neighbor averages: diff row i = X_i - avg_i for rows with a
// nonempty top-k list; rows without one carry no regularization term.
void average_diff(const DenseMatrix& x, const NeighborIndex& ix, bool parallel, DenseMatrix& diff,
                  std::vector<char>& valid) {
  int n = x.rows, d = x.cols;
  diff = DenseMatrix(n, d);
  valid.assign(static_cast<size_t>(n), 0);
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < n; ++i) {
    double wsum = ix.plus_weight_sum[i];
    if (wsum <= 0.0) continue;
    valid[i] = 1;
    double* out = diff.row(i);
    auto js = ix.plus(i);
    auto ws = ix.plus_w(i);
    for (size_t p = 0; p < js.size(); ++p) {
      const double* xr = x.row(js[p]);
      double w = ws[p] / wsum;
      for (int k = 0; k < d; ++k) out[k] += w * xr[k];
    }
    const double* xi = x.row(i);
    for (int k = 0; k < d; ++k) out[k] = xi[k] - out[k];
  }
}

// One regularized side (users or items); owns the symmetrized matrix for
// individual mode.
struct SideCtx {
  RegMode mode = RegMode::None;
  double weight = 0.0;
  const NeighborIndex* ix = nullptr;
  const CsrMatrix* s = nullptr;
  CsrMatrix w_sym;  // S + S^T

  static SideCtx make(RegMode mode, double weight, const NeighborIndex* ix,
                      const SimilarityMatrix* sim) {
    SideCtx c;
    c.mode = mode;
    c.weight = weight;
    if (mode == RegMode::Average) c.ix = ix;
    if (mode == RegMode::Individual) {
      c.s = &sim->s;
      CsrMatrix t = transpose(sim->s);
      c.w_sym = weighted_sum({&sim->s, &t}, {1.0, 1.0});
    }
    return c;
  }

  double objective_term(const DenseMatrix& x, bool parallel) const {
    if (mode == RegMode::None || weight == 0.0) return 0.0;
    int d = x.cols;
    double acc = 0.0;
    if (mode == RegMode::Average) {
      DenseMatrix diff;
      std::vector<char> valid;
      average_diff(x, *ix, parallel, diff, valid);
#pragma omp parallel for schedule(static) reduction(+ : acc) if (parallel)
      for (int i = 0; i < x.rows; ++i) {
        if (!valid[i]) continue;
        const double* row = diff.row(i);
        double s2 = 0.0;
        for (int k = 0; k < d; ++k) s2 += row[k] * row[k];
        acc += s2;
      }
    } else {
#pragma omp parallel for schedule(dynamic, 256) reduction(+ : acc) if (parallel)
      for (int i = 0; i < s->rows; ++i) {
        auto idx = s->row_indices(i);
        auto val = s->row_values(i);
        double row_acc = 0.0;
        for (size_t p = 0; p < idx.size(); ++p) {
          const double* xi = x.row(i);
          const double* xj = x.row(idx[p]);
          double d2 = 0.0;
          for (int k = 0; k < d; ++k) {
            double dv = xi[k] - xj[k];
            d2 += dv * dv;
          }
          row_acc += val[p] * d2;
        }
        acc += row_acc;
      }
    }
    return 0.5 * weight * acc;
  }

  // Adds the regularization gradient into g (same shape as x).
  void add_gradient(const DenseMatrix& x, bool parallel, DenseMatrix& g) const {
    if (mode == RegMode::None || weight == 0.0) return;
    int d = x.cols;
    if (mode == RegMode::Average) {
      DenseMatrix diff;
      std::vector<char> valid;
      average_diff(x, *ix, parallel, diff, valid);
#pragma omp parallel for schedule(static) if (parallel)
      for (int i = 0; i < x.rows; ++i) {
        double* gi = g.row(i);
        if (valid[i]) {
          const double* di = diff.row(i);
          for (int k = 0; k < d; ++k) gi[k] += weight * di[k];
        }
        // back-propagated term from rows whose top-k list contains i
        for (std::int64_t p = ix->minus_ptr[i]; p < ix->minus_ptr[i + 1]; ++p) {
          int gg = ix->minus_idx[p];
          double w = ix->minus_weight[p] / ix->plus_weight_sum[gg];
          const double* dg = diff.row(gg);
          for (int k = 0; k < d; ++k) gi[k] -= weight * w * dg[k];
        }
      }
    } else {
#pragma omp parallel for schedule(dynamic, 256) if (parallel)
      for (int i = 0; i < w_sym.rows; ++i) {
        double* gi = g.row(i);
        const double* xi = x.row(i);
        auto idx = w_sym.row_indices(i);
        auto val = w_sym.row_values(i);
        for (size_t p = 0; p < idx.size(); ++p) {
          const double* xj = x.row(idx[p]);
          double w = weight * val[p];
          for (int k = 0; k < d; ++k) gi[k] += w * (xi[k] - xj[k]);
        }
      }
    }
  }
};

double squared_error(const FactorModel& model, const RatingMatrix& ratings, bool parallel) {
  int d = model.d;
  double acc = 0.0;
  const CsrMatrix& r = ratings.by_user;
#pragma omp parallel for schedule(dynamic, 256) reduction(+ : acc) if (parallel)
  for (int i = 0; i < r.rows; ++i) {
    const double* u = model.user_factors.row(i);
    auto idx = r.row_indices(i);
    auto val = r.row_values(i);
    double row_acc = 0.0;
    for (size_t p = 0; p < idx.size(); ++p) {
      const double* v = model.item_factors.row(idx[p]);
      double e = -val[p];
      for (int k = 0; k < d; ++k) e += u[k] * v[k];
      row_acc += e * e;
    }
    acc += row_acc;
  }
  return acc;
}

}  // namespace

double objective(const FactorModel& model, const RatingMatrix& ratings,
                 const RegularizationSpec& reg, const TrainConfig& cfg) {
  validate_shapes(model, ratings, reg);
  SideCtx user = SideCtx::make(reg.user_mode, reg.alpha, reg.user_neighbors, reg.user_similarity);
  SideCtx item = SideCtx::make(reg.item_mode, reg.beta, reg.item_neighbors, reg.item_similarity);
  double obj = 0.5 * squared_error(model, ratings, cfg.parallel);
  obj += user.objective_term(model.user_factors, cfg.parallel);
  obj += item.objective_term(model.item_factors, cfg.parallel);
  obj += 0.5 * cfg.lambda1 * frobenius_sq(model.user_factors);
  obj += 0.5 * cfg.lambda2 * frobenius_sq(model.item_factors);
  return obj;
}

namespace {

DenseMatrix grad_user_impl(const FactorModel& model, const RatingMatrix& ratings,
                           const SideCtx& user, double lambda1, bool parallel) {
  int m = ratings.users, d = model.d;
  DenseMatrix g(m, d);
  const CsrMatrix& r = ratings.by_user;
#pragma omp parallel for schedule(dynamic, 256) if (parallel)
  for (int i = 0; i < m; ++i) {
    double* gi = g.row(i);
    const double* u = model.user_factors.row(i);
    auto idx = r.row_indices(i);
    auto val = r.row_values(i);
    for (size_t p = 0; p < idx.size(); ++p) {
      const double* v = model.item_factors.row(idx[p]);
      double e = -val[p];
      for (int k = 0; k < d; ++k) e += u[k] * v[k];
      for (int k = 0; k < d; ++k) gi[k] += e * v[k];
    }
    for (int k = 0; k < d; ++k) gi[k] += lambda1 * u[k];
  }
  user.add_gradient(model.user_factors, parallel, g);
  return g;
}

DenseMatrix grad_item_impl(const FactorModel& model, const RatingMatrix& ratings,
                           const SideCtx& item, double lambda2, bool parallel) {
  int n = ratings.items, d = model.d;
  DenseMatrix g(n, d);
  const CsrMatrix& r = ratings.by_item;
#pragma omp parallel for schedule(dynamic, 256) if (parallel)
  for (int j = 0; j < n; ++j) {
    double* gj = g.row(j);
    const double* v = model.item_factors.row(j);
    auto idx = r.row_indices(j);
    auto val = r.row_values(j);
    for (size_t p = 0; p < idx.size(); ++p) {
      const double* u = model.user_factors.row(idx[p]);
      double e = -val[p];
      for (int k = 0; k < d; ++k) e += u[k] * v[k];
      for (int k = 0; k < d; ++k) gj[k] += e * u[k];
    }
    for (int k = 0; k < d; ++k) gj[k] += lambda2 * v[k];
  }
  item.add_gradient(model.item_factors, parallel, g);
  return g;
}

}  // namespace

DenseMatrix grad_user(const FactorModel& model, const RatingMatrix& ratings,
                      const RegularizationSpec& reg, const TrainConfig& cfg) {
  validate_shapes(model, ratings, reg);
  SideCtx user = SideCtx::make(reg.user_mode, reg.alpha, reg.user_neighbors, reg.user_similarity);
  return grad_user_impl(model, ratings, user, cfg.lambda1, cfg.parallel);
}

DenseMatrix grad_item(const FactorModel& model, const RatingMatrix& ratings,
                      const RegularizationSpec& reg, const TrainConfig& cfg) {
  validate_shapes(model, ratings, reg);
  SideCtx item = SideCtx::make(reg.item_mode, reg.beta, reg.item_neighbors, reg.item_similarity);
  return grad_item_impl(model, ratings, item, cfg.lambda2, cfg.parallel);
}

double gaussian(std::mt19937_64& rng) {
  // Box-Muller on explicit 53-bit uniforms; avoids the implementation-defined
  // std::normal_distribution so seeds reproduce across standard libraries.
  double u1 = static_cast<double>((rng() >> 11) + 1) * (1.0 / 9007199254740992.0);  // (0,1]
  double u2 = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);        // [0,1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

FactorModel init_model(int users, int items, const TrainConfig& cfg) {
  if (cfg.d < 1) throw ConfigError("latent dimension must be >= 1");
  FactorModel model;
  model.d = cfg.d;
  model.user_factors = DenseMatrix(users, cfg.d);
  model.item_factors = DenseMatrix(items, cfg.d);
  std::mt19937_64 rng(cfg.seed);
  for (double& v : model.user_factors.data) v = cfg.init_scale * gaussian(rng);
  for (double& v : model.item_factors.data) v = cfg.init_scale * gaussian(rng);
  return model;
}

TrainResult train(const RatingMatrix& ratings, const RegularizationSpec& reg,
                  const TrainConfig& cfg) {
  if (cfg.eta <= 0.0) throw ConfigError("learning rate must be positive");
  if (cfg.epsilon <= 0.0) throw ConfigError("convergence tolerance must be positive");
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0) throw ConfigError("ridge weights must be >= 0");

  TrainResult res;
  res.model = init_model(ratings.users, ratings.items, cfg);
  validate_shapes(res.model, ratings, reg);
  SideCtx user = SideCtx::make(reg.user_mode, reg.alpha, reg.user_neighbors, reg.user_similarity);
  SideCtx item = SideCtx::make(reg.item_mode, reg.beta, reg.item_neighbors, reg.item_similarity);

  auto eval = [&](const FactorModel& m) {
    double obj = 0.5 * squared_error(m, ratings, cfg.parallel);
    obj += user.objective_term(m.user_factors, cfg.parallel);
    obj += item.objective_term(m.item_factors, cfg.parallel);
    obj += 0.5 * cfg.lambda1 * frobenius_sq(m.user_factors);
    obj += 0.5 * cfg.lambda2 * frobenius_sq(m.item_factors);
    return obj;
  };

  double obj = eval(res.model);
  res.trace.push_back({0, obj, 0.0, 0.0});

  FactorModel cand = res.model;
  res.stop_reason = "max_iters";
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    DenseMatrix gu = grad_user_impl(res.model, ratings, user, cfg.lambda1, cfg.parallel);
    DenseMatrix gv = grad_item_impl(res.model, ratings, item, cfg.lambda2, cfg.parallel);

    double eta = cfg.eta;
    bool accepted = false;
    double cand_obj = 0.0;
    for (int attempt = 0; attempt <= 20; ++attempt) {
      for (size_t p = 0; p < cand.user_factors.data.size(); ++p)
        cand.user_factors.data[p] = res.model.user_factors.data[p] - eta * gu.data[p];
      for (size_t p = 0; p < cand.item_factors.data.size(); ++p)
        cand.item_factors.data[p] = res.model.item_factors.data[p] - eta * gv.data[p];
      cand_obj = eval(cand);
      bool finite = std::isfinite(cand_obj) && all_finite(cand.user_factors) &&
                    all_finite(cand.item_factors);
      if (!cfg.step_halving) {
        if (!finite)
          throw DivergenceError("training diverged at iteration " + std::to_string(iter),
                                res.model);
        accepted = true;
        break;
      }
      if (finite && cand_obj <= obj) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      res.stop_reason = "stalled";
      break;
    }

    double delta = frobenius_sq_diff(cand.user_factors, res.model.user_factors) +
                   frobenius_sq_diff(cand.item_factors, res.model.item_factors);
    std::swap(res.model, cand);
    obj = cand_obj;
    res.trace.push_back({iter, obj, delta, eta});
    if (delta < cfg.epsilon) {
      res.converged = true;
      res.stop_reason = "converged";
      break;
    }
  }
  return res;
}

// --- checkpoints -------------------------------------------------------------

namespace {
constexpr std::uint32_t kCkptMagic = 0x53464d4d;  // "SFMM"
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DatasetError("checkpoint truncated");
}
}  // namespace

void save_checkpoint(const std::string& path, const FactorModel& model, const TrainConfig& cfg,
                     std::uint64_t dataset_checksum) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write checkpoint " + path);
  put(out, kCkptMagic);
  put(out, kCkptVersion);
  put(out, dataset_checksum);
  put(out, model.d);
  put(out, model.user_factors.rows);
  put(out, model.item_factors.rows);
  put(out, cfg.eta);
  put(out, cfg.lambda1);
  put(out, cfg.lambda2);
  put(out, cfg.epsilon);
  put(out, cfg.max_iters);
  put(out, cfg.seed);
  put(out, cfg.init_scale);
  out.write(reinterpret_cast<const char*>(model.user_factors.data.data()),
            static_cast<std::streamsize>(model.user_factors.data.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(model.item_factors.data.data()),
            static_cast<std::streamsize>(model.item_factors.data.size() * sizeof(double)));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open checkpoint " + path);
  std::uint32_t magic = 0, version = 0;
  get(in, magic);
  get(in, version);
  if (magic != kCkptMagic || version != kCkptVersion)
    throw DatasetError("not a model checkpoint: " + path);
  Checkpoint c;
  get(in, c.dataset_checksum);
  int m = 0, n = 0;
  get(in, c.cfg.d);
  get(in, m);
  get(in, n);
  get(in, c.cfg.eta);
  get(in, c.cfg.lambda1);
  get(in, c.cfg.lambda2);
  get(in, c.cfg.epsilon);
  get(in, c.cfg.max_iters);
  get(in, c.cfg.seed);
  get(in, c.cfg.init_scale);
  c.model.d = c.cfg.d;
  c.model.user_factors = DenseMatrix(m, c.cfg.d);
  c.model.item_factors = DenseMatrix(n, c.cfg.d);
  in.read(reinterpret_cast<char*>(c.model.user_factors.data.data()),
          static_cast<std::streamsize>(c.model.user_factors.data.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(c.model.item_factors.data.data()),
          static_cast<std::streamsize>(c.model.item_factors.data.size() * sizeof(double)));
  if (!in) throw DatasetError("checkpoint truncated: " + path);
  return c;
}

// --- reference implementations ------------------------------------------------

namespace reference {

namespace {

double rating_at(const RatingMatrix& ratings, int i, int j, bool& present) {
  double v = ratings.by_user.at(i, j);
  present = false;
  auto idx = ratings.by_user.row_indices(i);
  for (size_t p = 0; p < idx.size(); ++p)
    if (idx[p] == j) present = true;
  return v;
}

}  // namespace

double objective(const FactorModel& model, const RatingMatrix& ratings,
                 const RegularizationSpec& reg, const TrainConfig& cfg) {
  int m = ratings.users, n = ratings.items, d = model.d;
  double obj = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      bool present = false;
      double r = rating_at(ratings, i, j, present);
      if (!present) continue;
      double e = -r;
      for (int k = 0; k < d; ++k) e += model.user_factors.at(i, k) * model.item_factors.at(j, k);
      obj += 0.5 * e * e;
    }

  auto side = [&](RegMode mode, double weight, const NeighborIndex* ix,
                  const SimilarityMatrix* sim, const DenseMatrix& x) {
    if (mode == RegMode::None || weight == 0.0) return 0.0;
    double acc = 0.0;
    if (mode == RegMode::Average) {
      for (int i = 0; i < x.rows; ++i) {
        auto js = ix->plus(i);
        auto ws = ix->plus_w(i);
        if (js.empty()) continue;
        double wsum = 0.0;
        for (double w : ws) wsum += w;
        for (int k = 0; k < x.cols; ++k) {
          double avg = 0.0;
          for (size_t p = 0; p < js.size(); ++p) avg += ws[p] * x.at(js[p], k);
          avg /= wsum;
          double dv = x.at(i, k) - avg;
          acc += dv * dv;
        }
      }
    } else {
      for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.rows; ++j) {
          double s = sim->s.at(i, j);
          if (s == 0.0) continue;
          for (int k = 0; k < x.cols; ++k) {
            double dv = x.at(i, k) - x.at(j, k);
            acc += s * dv * dv;
          }
        }
    }
    return 0.5 * weight * acc;
  };
  obj += side(reg.user_mode, reg.alpha, reg.user_neighbors, reg.user_similarity,
              model.user_factors);
  obj += side(reg.item_mode, reg.beta, reg.item_neighbors, reg.item_similarity,
              model.item_factors);
  obj += 0.5 * cfg.lambda1 * frobenius_sq(model.user_factors);
  obj += 0.5 * cfg.lambda2 * frobenius_sq(model.item_factors);
  return obj;
}

namespace {

DenseMatrix grad_side(const DenseMatrix& x, RegMode mode, double weight, const NeighborIndex* ix,
                      const SimilarityMatrix* sim) {
  DenseMatrix g(x.rows, x.cols);
  if (mode == RegMode::None || weight == 0.0) return g;
  if (mode == RegMode::Average) {
    DenseMatrix diff(x.rows, x.cols);
    std::vector<char> valid(static_cast<size_t>(x.rows), 0);
    std::vector<double> wsum(static_cast<size_t>(x.rows), 0.0);
    for (int i = 0; i < x.rows; ++i) {
      auto js = ix->plus(i);
      auto ws = ix->plus_w(i);
      if (js.empty()) continue;
      valid[i] = 1;
      for (double w : ws) wsum[i] += w;
      for (int k = 0; k < x.cols; ++k) {
        double avg = 0.0;
        for (size_t p = 0; p < js.size(); ++p) avg += ws[p] * x.at(js[p], k);
        diff.at(i, k) = x.at(i, k) - avg / wsum[i];
      }
    }
    for (int i = 0; i < x.rows; ++i) {
      if (valid[i])
        for (int k = 0; k < x.cols; ++k) g.at(i, k) += weight * diff.at(i, k);
      for (int gg = 0; gg < x.rows; ++gg) {
        if (!valid[gg]) continue;
        auto js = ix->plus(gg);
        auto ws = ix->plus_w(gg);
        for (size_t p = 0; p < js.size(); ++p)
          if (js[p] == i)
            for (int k = 0; k < x.cols; ++k)
              g.at(i, k) -= weight * ws[p] / wsum[gg] * diff.at(gg, k);
      }
    }
  } else {
    for (int i = 0; i < x.rows; ++i)
      for (int j = 0; j < x.rows; ++j) {
        double w = sim->s.at(i, j) + sim->s.at(j, i);
        if (w == 0.0) continue;
        for (int k = 0; k < x.cols; ++k) g.at(i, k) += weight * w * (x.at(i, k) - x.at(j, k));
      }
  }
  return g;
}

}  // namespace

DenseMatrix grad_user(const FactorModel& model, const RatingMatrix& ratings,
                      const RegularizationSpec& reg, const TrainConfig& cfg) {
  int m = ratings.users, n = ratings.items, d = model.d;
  DenseMatrix g = grad_side(model.user_factors, reg.user_mode, reg.alpha, reg.user_neighbors,
                            reg.user_similarity);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      bool present = false;
      double r = rating_at(ratings, i, j, present);
      if (!present) continue;
      double e = -r;
      for (int k = 0; k < d; ++k) e += model.user_factors.at(i, k) * model.item_factors.at(j, k);
      for (int k = 0; k < d; ++k) g.at(i, k) += e * model.item_factors.at(j, k);
    }
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) g.at(i, k) += cfg.lambda1 * model.user_factors.at(i, k);
  return g;
}

DenseMatrix grad_item(const FactorModel& model, const RatingMatrix& ratings,
                      const RegularizationSpec& reg, const TrainConfig& cfg) {
  int m = ratings.users, n = ratings.items, d = model.d;
  DenseMatrix g = grad_side(model.item_factors, reg.item_mode, reg.beta, reg.item_neighbors,
                            reg.item_similarity);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      bool present = false;
      double r = rating_at(ratings, i, j, present);
      if (!present) continue;
      double e = -r;
      for (int k = 0; k < d; ++k) e += model.user_factors.at(i, k) * model.item_factors.at(j, k);
      for (int k = 0; k < d; ++k) g.at(j, k) += e * model.user_factors.at(i, k);
    }
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < d; ++k) g.at(j, k) += cfg.lambda2 * model.item_factors.at(j, k);
  return g;
}

}  // namespace reference

}  // namespace simmf
