#include "simmf/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "simmf/baselines.hpp"
#include "simmf/errors.hpp"
#include "simmf/metapath.hpp"

namespace simmf {

namespace fs = std::filesystem;
using nlohmann::json;

MethodSpec MethodSpec::parse(const std::string& full_label) {
  MethodSpec m;
  m.label = full_label;
  std::string label = full_label;
  size_t at = label.find('@');
  if (at != std::string::npos) {
    std::string params = label.substr(at + 1);
    label = label.substr(0, at);
    std::istringstream in(params);
    std::string tok;
    while (std::getline(in, tok, '_')) {
      if (tok.size() < 2 || (tok[0] != 'a' && tok[0] != 'b'))
        throw ConfigError("method '" + full_label + "': bad parameter '" + tok + "'");
      double v = std::stod(tok.substr(1));
      if (tok[0] == 'a') m.alpha = v;
      else m.beta = v;
    }
  }

  if (label == "usermean") { m.kind = Kind::UserMean; return m; }
  if (label == "itemmean") { m.kind = Kind::ItemMean; return m; }
  if (label == "pmf") { m.kind = Kind::Pmf; return m; }
  if (label == "somf") { m.kind = Kind::Somf; return m; }
  if (label == "simmf") {  // default dual variant
    m.kind = Kind::Simmf;
    m.user_mode = RegMode::Average;
    m.item_mode = RegMode::Individual;
    return m;
  }
  if (label.rfind("simmf-", 0) == 0) {
    m.kind = Kind::Simmf;
    std::string codes = label.substr(6);
    if (codes.empty() || codes.size() % 2 != 0)
      throw ConfigError("method '" + full_label + "': expected side/mode pairs after 'simmf-'");
    for (size_t i = 0; i < codes.size(); i += 2) {
      char side = codes[i], mode = codes[i + 1];
      RegMode rm;
      if (mode == 'a') rm = RegMode::Average;
      else if (mode == 'i') rm = RegMode::Individual;
      else throw ConfigError("method '" + full_label + "': unknown mode '" + mode + "'");
      if (side == 'u') {
        if (m.user_mode != RegMode::None)
          throw ConfigError("method '" + full_label + "': user side given twice");
        m.user_mode = rm;
      } else if (side == 'i') {
        if (m.item_mode != RegMode::None)
          throw ConfigError("method '" + full_label + "': item side given twice");
        m.item_mode = rm;
      } else {
        throw ConfigError("method '" + full_label + "': unknown side '" + side + "'");
      }
    }
    return m;
  }
  throw ConfigError("unknown method '" + full_label + "'");
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  ExperimentConfig c;
  if (j.value("version", 1) != 1)
    throw ConfigError("config file " + path + ": unsupported version");
  c.dataset_dir = j.value("dataset", c.dataset_dir);
  // dataset paths travel with the recipe; outputs resolve against the cwd
  if (!c.dataset_dir.empty() && fs::path(c.dataset_dir).is_relative()) {
    fs::path anchored = fs::path(path).parent_path() / c.dataset_dir;
    if (fs::exists(anchored)) c.dataset_dir = anchored.string();
    else if (fs::exists(fs::path(path).parent_path().parent_path() / c.dataset_dir))
      c.dataset_dir = (fs::path(path).parent_path().parent_path() / c.dataset_dir).string();
  }
  c.out_dir = j.value("out", c.out_dir);
  c.cache_dir = j.value("cache_dir", c.cache_dir);
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("ratios")) c.ratios = j.at("ratios").get<std::vector<double>>();
  c.trials = j.value("trials", c.trials);
  c.seed = j.value("seed", c.seed);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  if (j.contains("alpha_grid")) c.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
  if (j.contains("beta_grid")) c.beta_grid = j.at("beta_grid").get<std::vector<double>>();
  if (j.contains("paths_user")) c.paths_user = j.at("paths_user").get<std::vector<std::string>>();
  if (j.contains("paths_item")) c.paths_item = j.at("paths_item").get<std::vector<std::string>>();
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    if (w.is_string()) {
      apply_weights_option(c, w.get<std::string>());
    } else {
      c.weight_rule = WeightRule::Explicit;
      if (w.contains("user")) c.weights_user = w.at("user").get<std::vector<double>>();
      if (w.contains("item")) c.weights_item = w.at("item").get<std::vector<double>>();
    }
  }
  c.neighbor_fraction = j.value("neighbor_fraction", c.neighbor_fraction);
  c.neighbor_k = j.value("neighbor_k", c.neighbor_k);
  if (j.contains("individual_support")) {
    std::string s = j.at("individual_support").get<std::string>();
    if (s == "topk") c.individual_support = IndividualSupport::TopK;
    else if (s == "full") c.individual_support = IndividualSupport::Full;
    else throw ConfigError("individual_support must be 'topk' or 'full'");
  }
  c.prune = j.value("prune", c.prune);
  c.cache_split_dependent = j.value("cache_split_dependent", c.cache_split_dependent);
  c.norm_beta = j.value("norm_beta", c.norm_beta);
  c.baseline = j.value("baseline", c.baseline);
  if (j.contains("train")) {
    const json& t = j.at("train");
    c.train.d = t.value("d", c.train.d);
    c.train.eta = t.value("eta", c.train.eta);
    c.train.lambda1 = t.value("lambda1", c.train.lambda1);
    c.train.lambda2 = t.value("lambda2", c.train.lambda2);
    c.train.epsilon = t.value("epsilon", c.train.epsilon);
    c.train.max_iters = t.value("max_iters", c.train.max_iters);
    c.train.init_scale = t.value("init_scale", c.train.init_scale);
  }
  c.deterministic = j.value("deterministic", c.deterministic);
  return c;
}

void apply_weights_option(ExperimentConfig& cfg, const std::string& value) {
  if (value == "equal") {
    cfg.weight_rule = WeightRule::Equal;
    return;
  }
  if (value == "heuristic") {
    cfg.weight_rule = WeightRule::Heuristic;
    return;
  }
  if (value.rfind("explicit:", 0) == 0) {
    cfg.weight_rule = WeightRule::Explicit;
    std::vector<double> all;
    std::istringstream in(value.substr(9));
    std::string tok;
    while (std::getline(in, tok, ',')) all.push_back(std::stod(tok));
    size_t nu = cfg.paths_user.size();
    if (all.size() != nu + cfg.paths_item.size())
      throw ConfigError("explicit weights: expected " +
                        std::to_string(nu + cfg.paths_item.size()) +
                        " values (user paths first, then item paths), got " +
                        std::to_string(all.size()));
    cfg.weights_user.assign(all.begin(), all.begin() + nu);
    cfg.weights_item.assign(all.begin() + nu, all.end());
    return;
  }
  throw ConfigError("weights must be 'equal', 'heuristic' or 'explicit:<csv>', got '" + value +
                    "'");
}

namespace {

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

std::string ratio_tag(double r) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", r);
  return buf;
}

void write_trace(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  out << "iter,objective,delta,eta\n";
  for (const TraceRow& t : trace) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.10e,%.10e,%.6e\n", t.iter, t.objective, t.delta,
                  t.eta);
    out << line;
  }
}

// Similarity structures for one side (users or items), shared by every
// method within a (ratio, trial) cell.
struct SideSims {
  SimilarityMatrix fused;
  NeighborIndex neighbors;
  SimilarityMatrix individual;  // top-k union support or the full fused matrix
  bool ready = false;
};

struct RunnerCtx {
  const ExperimentConfig* cfg = nullptr;
  const HinDataset* ds = nullptr;
  std::string cache_dir;
  std::vector<MetaPath> user_paths, item_paths;
  std::vector<double> weights_user, weights_item;
};

SimilarityMatrix normalized_path_similarity(const RunnerCtx& ctx, const RelationStore& store,
                                            const MetaPath& path) {
  const ExperimentConfig& cfg = *ctx.cfg;
  bool split_dependent = path.traverses(ctx.ds->user_type, ctx.ds->item_type);
  SimCacheKey key;
  key.store_signature = split_dependent ? store.signature() : ctx.ds->checksum;
  key.path_label = path.label;
  key.measure = "pathsim";
  key.normalized = true;
  key.norm_beta = cfg.norm_beta;
  key.prune = cfg.prune;
  if (auto cached = load_cached_similarity(ctx.cache_dir, key)) return std::move(*cached);
  SimilarityMatrix raw = pathsim(path, store, cfg.prune, !cfg.deterministic);
  SimilarityMatrix sim = normalize_similarity(raw, {cfg.norm_beta});
  if (!split_dependent || cfg.cache_split_dependent)
    store_cached_similarity(ctx.cache_dir, key, sim);
  return sim;
}

SideSims build_side(const RunnerCtx& ctx, const RelationStore& store,
                    const std::vector<MetaPath>& paths, const std::vector<double>& weights,
                    int object_count) {
  const ExperimentConfig& cfg = *ctx.cfg;
  SideSims side;
  if (paths.empty()) return side;
  std::vector<SimilarityMatrix> sims;
  sims.reserve(paths.size());
  for (const MetaPath& p : paths) sims.push_back(normalized_path_similarity(ctx, store, p));
  side.fused = fuse_similarities(sims, weights);
  int k = cfg.neighbor_k > 0 ? cfg.neighbor_k
                             : neighbor_count_from_fraction(object_count, cfg.neighbor_fraction);
  side.neighbors = build_neighbor_index(side.fused, k);
  side.individual = cfg.individual_support == IndividualSupport::TopK
                        ? topk_support(side.fused, side.neighbors)
                        : side.fused;
  side.ready = true;
  return side;
}

std::vector<double> equal_weights(size_t n) {
  return std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 0.0);
}

// Standalone-path probe used by the heuristic weight rule: measure each
// path's MAE with a single-path model, then weight paths by performance.
std::vector<double> probe_weights(RunnerCtx& ctx, const RatingMatrix& full,
                                  const std::vector<MetaPath>& paths, bool user_side,
                                  std::ofstream& probe_csv) {
  const ExperimentConfig& cfg = *ctx.cfg;
  SplitSpec spec{cfg.ratios.front(), std::max(1, cfg.trials), cfg.seed};
  auto [train_set, test_set] = split(full, spec, 0);
  RelationStore store = RelationStore::build(*ctx.ds, &train_set);
  std::vector<double> maes;
  for (const MetaPath& p : paths) {
    SimilarityMatrix sim = normalized_path_similarity(ctx, store, p);
    int count = user_side ? full.users : full.items;
    int k = cfg.neighbor_k > 0 ? cfg.neighbor_k
                               : neighbor_count_from_fraction(count, cfg.neighbor_fraction);
    NeighborIndex nbrs = build_neighbor_index(sim, k);
    SimilarityMatrix support = topk_support(sim, nbrs);
    RegularizationSpec reg;
    if (user_side) {
      reg.user_mode = RegMode::Average;
      reg.alpha = cfg.alpha;
      reg.user_neighbors = &nbrs;
    } else {
      reg.item_mode = RegMode::Individual;
      reg.beta = cfg.beta;
      reg.item_similarity = &support;
    }
    TrainConfig tc = cfg.train;
    tc.parallel = !cfg.deterministic;
    tc.seed = mix_seed(cfg.seed, 0x70726f6265);  // fixed probe salt
    TrainResult r = train(train_set, reg, tc);
    std::vector<double> preds = clamped_predictions(
        [&](int u, int i) { return predict(r.model, u, i); }, test_set);
    maes.push_back(mae(preds, test_set));
  }
  std::vector<double> w = heuristic_weights(maes);
  for (size_t i = 0; i < paths.size(); ++i) {
    char line[160];
    std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f\n", user_side ? "user" : "item",
                  paths[i].label.c_str(), maes[i], w[i]);
    probe_csv << line;
  }
  return w;
}

}  // namespace

EvalReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.ratios.empty()) throw ConfigError("no training ratios configured");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.methods.empty()) throw ConfigError("no methods configured");
  for (double r : cfg.ratios)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("ratio " + std::to_string(r) + " outside (0,1)");

  fs::create_directories(cfg.out_dir);
  std::string status_path = (fs::path(cfg.out_dir) / "status.txt").string();
  {
    std::ofstream status(status_path);
    status << "running\n";
  }

  auto mark_incomplete = [&](const std::string& where, const std::string& why) {
    std::ofstream status(status_path);
    status << "incomplete: " << where << ": " << why << "\n";
  };

  HinDataset ds;
  try {
    ds = load_dataset(cfg.dataset_dir);
  } catch (const std::exception& e) {
    mark_incomplete("setup", e.what());
    throw;
  }
  save_id_maps(ds, (fs::path(cfg.out_dir) / "idmaps").string());

  RunnerCtx ctx;
  ctx.cfg = &cfg;
  ctx.ds = &ds;
  if (const char* env = std::getenv("SIMMF_CACHE_DIR"); env && *env)
    ctx.cache_dir = env;
  else if (!cfg.cache_dir.empty())
    ctx.cache_dir = cfg.cache_dir;
  else
    ctx.cache_dir = (fs::path(cfg.out_dir) / "simcache").string();

  // paths must parse against the schema before any training starts
  for (const std::string& label : cfg.paths_user)
    ctx.user_paths.push_back(parse_metapath(label, ds.schema));
  for (const std::string& label : cfg.paths_item)
    ctx.item_paths.push_back(parse_metapath(label, ds.schema));

  // expand method labels, applying the alpha/beta sweep grid to simmf methods
  std::vector<MethodSpec> methods;
  for (const std::string& label : cfg.methods) {
    MethodSpec base = MethodSpec::parse(label);
    if (base.kind == MethodSpec::Kind::Simmf && !cfg.alpha_grid.empty() &&
        !cfg.beta_grid.empty() && !base.alpha && !base.beta) {
      for (double a : cfg.alpha_grid)
        for (double b : cfg.beta_grid) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%s@a%g_b%g", label.c_str(), a, b);
          methods.push_back(MethodSpec::parse(buf));
        }
    } else {
      methods.push_back(std::move(base));
    }
  }

  bool needs_user_side = false, needs_item_side = false;
  for (const MethodSpec& m : methods) {
    if (m.kind == MethodSpec::Kind::Simmf) {
      if (m.user_mode != RegMode::None) needs_user_side = true;
      if (m.item_mode != RegMode::None) needs_item_side = true;
    }
  }
  if (needs_user_side && ctx.user_paths.empty())
    throw ConfigError("configured methods need user-side similarity but no user paths are set");
  if (needs_item_side && ctx.item_paths.empty())
    throw ConfigError("configured methods need item-side similarity but no item paths are set");

  // path weights
  switch (cfg.weight_rule) {
    case WeightRule::Equal:
      ctx.weights_user = equal_weights(ctx.user_paths.size());
      ctx.weights_item = equal_weights(ctx.item_paths.size());
      break;
    case WeightRule::Explicit:
      ctx.weights_user = cfg.weights_user;
      ctx.weights_item = cfg.weights_item;
      if (ctx.weights_user.size() != ctx.user_paths.size() ||
          ctx.weights_item.size() != ctx.item_paths.size())
        throw ConfigError("explicit weights do not match the configured path lists");
      break;
    case WeightRule::Heuristic: {
      std::ofstream probe_csv((fs::path(cfg.out_dir) / "path_probe.csv").string());
      probe_csv << "side,path,mae,weight\n";
      if (needs_user_side)
        ctx.weights_user = probe_weights(ctx, ds.ratings, ctx.user_paths, true, probe_csv);
      else
        ctx.weights_user = equal_weights(ctx.user_paths.size());
      if (needs_item_side)
        ctx.weights_item = probe_weights(ctx, ds.ratings, ctx.item_paths, false, probe_csv);
      else
        ctx.weights_item = equal_weights(ctx.item_paths.size());
      break;
    }
  }

  EvalReport report;
  std::string trials_path = (fs::path(cfg.out_dir) / "trials.csv").string();
  auto flush_trials = [&] { report.write_trials_csv(trials_path); };

  std::string context_note;
  try {
    for (double ratio : cfg.ratios) {
      for (int trial = 0; trial < cfg.trials; ++trial) {
        context_note = "ratio=" + ratio_tag(ratio) + " trial=" + std::to_string(trial);
        SplitSpec spec{ratio, cfg.trials, cfg.seed};
        auto [train_set, test_set] = split(ds.ratings, spec, trial);
        RelationStore store = RelationStore::build(ds, &train_set);

        SideSims user_side, item_side;
        if (needs_user_side)
          user_side = build_side(ctx, store, ctx.user_paths, ctx.weights_user, ds.ratings.users);
        if (needs_item_side)
          item_side = build_side(ctx, store, ctx.item_paths, ctx.weights_item, ds.ratings.items);

        for (const MethodSpec& m : methods) {
          context_note = "method=" + m.label + " ratio=" + ratio_tag(ratio) +
                         " trial=" + std::to_string(trial);
          Clock clock;
          std::vector<double> preds;
          std::vector<TraceRow> trace;
          TrainConfig tc = cfg.train;
          tc.parallel = !cfg.deterministic;
          tc.seed = mix_seed(cfg.seed, fnv1a_str(m.label, 0x5eed) + trial);

          switch (m.kind) {
            case MethodSpec::Kind::UserMean: {
              MeanModel mm = fit_mean(train_set, MeanKind::User);
              preds = clamped_predictions([&](int u, int i) { return mm.predict(u, i); },
                                          test_set);
              break;
            }
            case MethodSpec::Kind::ItemMean: {
              MeanModel mm = fit_mean(train_set, MeanKind::Item);
              preds = clamped_predictions([&](int u, int i) { return mm.predict(u, i); },
                                          test_set);
              break;
            }
            case MethodSpec::Kind::Pmf: {
              TrainResult r = pmf_preset(train_set, tc);
              trace = std::move(r.trace);
              preds = clamped_predictions(
                  [&](int u, int i) { return predict(r.model, u, i); }, test_set);
              break;
            }
            case MethodSpec::Kind::Somf: {
              SomfOptions so;
              so.alpha = m.alpha.value_or(cfg.alpha);
              so.k = cfg.neighbor_k;
              so.k_fraction = cfg.neighbor_fraction;
              so.norm_beta = cfg.norm_beta;
              TrainResult r = somf_preset(ds, train_set, tc, so);
              trace = std::move(r.trace);
              preds = clamped_predictions(
                  [&](int u, int i) { return predict(r.model, u, i); }, test_set);
              break;
            }
            case MethodSpec::Kind::Simmf: {
              RegularizationSpec reg;
              reg.user_mode = m.user_mode;
              reg.item_mode = m.item_mode;
              reg.alpha = m.user_mode == RegMode::None ? 0.0 : m.alpha.value_or(cfg.alpha);
              reg.beta = m.item_mode == RegMode::None ? 0.0 : m.beta.value_or(cfg.beta);
              if (m.user_mode == RegMode::Average) reg.user_neighbors = &user_side.neighbors;
              if (m.user_mode == RegMode::Individual) reg.user_similarity = &user_side.individual;
              if (m.item_mode == RegMode::Average) reg.item_neighbors = &item_side.neighbors;
              if (m.item_mode == RegMode::Individual) reg.item_similarity = &item_side.individual;
              TrainResult r = train(train_set, reg, tc);
              trace = std::move(r.trace);
              preds = clamped_predictions(
                  [&](int u, int i) { return predict(r.model, u, i); }, test_set);
              break;
            }
          }

          TrialRow row;
          row.method = m.label;
          row.ratio = ratio;
          row.trial = trial;
          row.mae = mae(preds, test_set);
          row.rmse = rmse(preds, test_set);
          row.seconds = clock.seconds();
          report.rows.push_back(row);
          if (!trace.empty())
            write_trace((fs::path(cfg.out_dir) /
                         ("trace_" + sanitize(m.label) + "_" + ratio_tag(ratio) + "_" +
                          std::to_string(trial) + ".csv"))
                            .string(),
                        trace);
          flush_trials();
        }
      }
    }
  } catch (const std::exception& e) {
    flush_trials();
    mark_incomplete(context_note, e.what());
    throw std::runtime_error("experiment failed at " + context_note + ": " + e.what());
  }

  flush_trials();
  report.write_long_csv((fs::path(cfg.out_dir) / "long.csv").string());
  bool have_baseline = false;
  for (const TrialRow& row : report.rows)
    if (row.method == cfg.baseline) have_baseline = true;
  std::string summary_baseline = have_baseline ? cfg.baseline : report.rows.front().method;
  report.write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(), summary_baseline);
  report.write_cells_csv((fs::path(cfg.out_dir) / "cells.csv").string(), summary_baseline);
  {
    std::ofstream status(status_path);
    status << "ok\n";
  }
  return report;
}

SingleTrain train_single(const ExperimentConfig& cfg, const std::string& method, double ratio,
                         int trial) {
  MethodSpec m = MethodSpec::parse(method);
  if (m.kind == MethodSpec::Kind::UserMean || m.kind == MethodSpec::Kind::ItemMean)
    throw ConfigError("method '" + method + "' has no factor model to train");

  HinDataset ds = load_dataset(cfg.dataset_dir);
  RunnerCtx ctx;
  ctx.cfg = &cfg;
  ctx.ds = &ds;
  ctx.cache_dir = cfg.cache_dir.empty()
                      ? (fs::path(cfg.out_dir) / "simcache").string()
                      : cfg.cache_dir;
  for (const std::string& label : cfg.paths_user)
    ctx.user_paths.push_back(parse_metapath(label, ds.schema));
  for (const std::string& label : cfg.paths_item)
    ctx.item_paths.push_back(parse_metapath(label, ds.schema));
  ctx.weights_user = equal_weights(ctx.user_paths.size());
  ctx.weights_item = equal_weights(ctx.item_paths.size());
  if (cfg.weight_rule == WeightRule::Explicit) {
    ctx.weights_user = cfg.weights_user;
    ctx.weights_item = cfg.weights_item;
  }

  RatingMatrix train_set = ds.ratings;
  if (ratio > 0.0 && ratio < 1.0) {
    SplitSpec spec{ratio, std::max(1, trial + 1), cfg.seed};
    train_set = split(ds.ratings, spec, trial).first;
  }

  TrainConfig tc = cfg.train;
  tc.parallel = !cfg.deterministic;
  tc.seed = mix_seed(cfg.seed, fnv1a_str(m.label, 0x5eed) + trial);

  SingleTrain out;
  out.dataset_checksum = ds.checksum;
  switch (m.kind) {
    case MethodSpec::Kind::Pmf:
      out.result = pmf_preset(train_set, tc);
      break;
    case MethodSpec::Kind::Somf: {
      SomfOptions so;
      so.alpha = m.alpha.value_or(cfg.alpha);
      so.k = cfg.neighbor_k;
      so.k_fraction = cfg.neighbor_fraction;
      so.norm_beta = cfg.norm_beta;
      out.result = somf_preset(ds, train_set, tc, so);
      break;
    }
    default: {
      RelationStore store = RelationStore::build(ds, &train_set);
      SideSims user_side, item_side;
      if (m.user_mode != RegMode::None) {
        if (ctx.user_paths.empty()) throw ConfigError("method needs user paths");
        user_side = build_side(ctx, store, ctx.user_paths, ctx.weights_user, ds.ratings.users);
      }
      if (m.item_mode != RegMode::None) {
        if (ctx.item_paths.empty()) throw ConfigError("method needs item paths");
        item_side = build_side(ctx, store, ctx.item_paths, ctx.weights_item, ds.ratings.items);
      }
      RegularizationSpec reg;
      reg.user_mode = m.user_mode;
      reg.item_mode = m.item_mode;
      reg.alpha = m.user_mode == RegMode::None ? 0.0 : m.alpha.value_or(cfg.alpha);
      reg.beta = m.item_mode == RegMode::None ? 0.0 : m.beta.value_or(cfg.beta);
      if (m.user_mode == RegMode::Average) reg.user_neighbors = &user_side.neighbors;
      if (m.user_mode == RegMode::Individual) reg.user_similarity = &user_side.individual;
      if (m.item_mode == RegMode::Average) reg.item_neighbors = &item_side.neighbors;
      if (m.item_mode == RegMode::Individual) reg.item_similarity = &item_side.individual;
      out.result = train(train_set, reg, tc);
      break;
    }
  }
  return out;
}

// --- MovieLens conversion -----------------------------------------------------

namespace {

std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + sep.size();
  }
  return out;
}

}  // namespace

void convert_movielens(const std::string& raw_dir, const std::string& out_dir,
                       std::int64_t subsample, std::uint64_t seed) {
  auto open_raw = [&](const std::string& name) {
    std::ifstream in((fs::path(raw_dir) / name).string());
    if (!in) throw DatasetError("missing MovieLens file: " + (fs::path(raw_dir) / name).string());
    return in;
  };

  // ratings.dat: UserID::MovieID::Rating::Timestamp
  struct RawRating {
    int user, movie;
    int rating;
  };
  std::vector<RawRating> ratings;
  int max_user = 0, max_movie = 0;
  {
    std::ifstream in = open_raw("ratings.dat");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cols = split_on(line, "::");
      if (cols.size() < 3) throw ValidationError("ratings.dat: bad line '" + line + "'");
      RawRating r{std::stoi(cols[0]), std::stoi(cols[1]), std::stoi(cols[2])};
      max_user = std::max(max_user, r.user);
      max_movie = std::max(max_movie, r.movie);
      ratings.push_back(r);
    }
  }
  if (ratings.empty()) throw DatasetError("ratings.dat contains no ratings");

  if (subsample > 0 && subsample < static_cast<std::int64_t>(ratings.size())) {
    std::vector<std::int64_t> order =
        shuffled_indices(static_cast<std::int64_t>(ratings.size()), mix_seed(seed, 0x4d4c));
    order.resize(static_cast<size_t>(subsample));
    std::sort(order.begin(), order.end());
    std::vector<RawRating> kept;
    kept.reserve(order.size());
    for (std::int64_t i : order) kept.push_back(ratings[i]);
    ratings = std::move(kept);
  }

  // users.dat: UserID::Gender::Age::Occupation::Zip
  struct RawUser {
    int id;
    std::string gender, age, occupation;
  };
  std::vector<RawUser> users;
  {
    std::ifstream in = open_raw("users.dat");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cols = split_on(line, "::");
      if (cols.size() < 4) throw ValidationError("users.dat: bad line '" + line + "'");
      users.push_back({std::stoi(cols[0]), cols[1], cols[2], cols[3]});
      max_user = std::max(max_user, users.back().id);
    }
  }

  // movies.dat: MovieID::Title::Genre|Genre|...
  struct RawMovie {
    int id;
    std::vector<std::string> genres;
  };
  std::vector<RawMovie> movies;
  {
    std::ifstream in = open_raw("movies.dat");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cols = split_on(line, "::");
      if (cols.size() < 3) throw ValidationError("movies.dat: bad line '" + line + "'");
      RawMovie m{std::stoi(cols[0]), split_on(cols[2], "|")};
      max_movie = std::max(max_movie, m.id);
      movies.push_back(std::move(m));
    }
  }

  fs::create_directories(out_dir);
  auto out_file = [&](const std::string& name) {
    std::ofstream out((fs::path(out_dir) / name).string());
    if (!out) throw DatasetError("cannot write " + (fs::path(out_dir) / name).string());
    return out;
  };

  {
    std::ofstream out = out_file("ratings.tsv");
    for (const RawRating& r : ratings)
      out << (r.user - 1) << '\t' << (r.movie - 1) << '\t' << r.rating << '\n';
  }
  {
    std::ofstream gender = out_file("user_gender.tsv");
    std::ofstream age = out_file("user_age.tsv");
    std::ofstream occ = out_file("user_occupation.tsv");
    for (const RawUser& u : users) {
      gender << (u.id - 1) << '\t' << u.gender << '\n';
      age << (u.id - 1) << '\t' << u.age << '\n';
      occ << (u.id - 1) << '\t' << u.occupation << '\n';
    }
  }
  {
    std::ofstream out = out_file("movie_genre.tsv");
    for (const RawMovie& m : movies)
      for (const std::string& g : m.genres)
        if (!g.empty()) out << (m.id - 1) << '\t' << g << '\n';
  }
  {
    json schema = {
        {"version", 1},
        {"entity_types",
         {{{"name", "U"}, {"count", max_user}},
          {{"name", "M"}, {"count", max_movie}},
          {{"name", "G"}},
          {{"name", "A"}},
          {{"name", "O"}},
          {{"name", "T"}}}},
        {"relations",
         {{{"name", "UM"}, {"source", "U"}, {"target", "M"}, {"file", "ratings.tsv"},
           {"kind", "rating"}},
          {{"name", "UGen"}, {"source", "U"}, {"target", "G"}, {"file", "user_gender.tsv"}},
          {{"name", "UAge"}, {"source", "U"}, {"target", "A"}, {"file", "user_age.tsv"}},
          {{"name", "UOcc"}, {"source", "U"}, {"target", "O"}, {"file", "user_occupation.tsv"}},
          {{"name", "MT"}, {"source", "M"}, {"target", "T"}, {"file", "movie_genre.tsv"}}}},
        {"rating_scale", {1, 5}}};
    std::ofstream out = out_file("schema.json");
    out << schema.dump(2) << '\n';
  }
}

}  // namespace simmf
