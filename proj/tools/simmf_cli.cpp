// Batch experiment runner for meta-path regularized matrix factorization.
//
//   simmf run --config recipes/toy.json [--out results/toy] [--deterministic]
//   simmf prepare-movielens --input ml-1m/ --output data/ml1m [--subsample N]
//   simmf train --config recipes/toy.json --method simmf-uaii --out model.bin
//   simmf predict --checkpoint model.bin --dataset data/toy --user u01 --item m3

#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simmf/errors.hpp"
#include "simmf/mf.hpp"
#include "simmf/runner.hpp"

namespace {

std::vector<double> parse_double_csv(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<std::string> parse_str_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(tok);
  return out;
}

struct RunOverrides {
  std::string config_path;
  std::vector<std::string> methods;
  std::string ratios, paths_user, paths_item, weights, out_dir, cache_dir;
  int trials = -1;
  double alpha = -1.0, beta = -1.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
};

simmf::ExperimentConfig make_config(const RunOverrides& o) {
  simmf::ExperimentConfig cfg = simmf::ExperimentConfig::from_json_file(o.config_path);
  if (!o.methods.empty()) cfg.methods = o.methods;
  if (!o.ratios.empty()) cfg.ratios = parse_double_csv(o.ratios);
  if (!o.paths_user.empty()) cfg.paths_user = parse_str_csv(o.paths_user);
  if (!o.paths_item.empty()) cfg.paths_item = parse_str_csv(o.paths_item);
  if (o.trials >= 0) cfg.trials = o.trials;
  if (o.alpha >= 0.0) cfg.alpha = o.alpha;
  if (o.beta >= 0.0) cfg.beta = o.beta;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (o.seed_set) cfg.seed = o.seed;
  if (o.deterministic) cfg.deterministic = true;
  if (!o.weights.empty()) simmf::apply_weights_option(cfg, o.weights);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meta-path regularized matrix factorization experiments"};
  app.require_subcommand(1);

  RunOverrides o;
  CLI::App* run = app.add_subcommand("run", "run an experiment recipe");
  run->add_option("--config", o.config_path, "experiment config (JSON)")->required();
  run->add_option("--method", o.methods, "override the method list (repeatable)");
  run->add_option("--ratios", o.ratios, "training ratios, e.g. 0.8,0.6,0.4,0.2");
  run->add_option("--trials", o.trials, "independent trials per ratio");
  run->add_option("--alpha", o.alpha, "user-side regularization weight");
  run->add_option("--beta", o.beta, "item-side regularization weight");
  run->add_option("--paths-user", o.paths_user, "comma-separated user meta paths");
  run->add_option("--paths-item", o.paths_item, "comma-separated item meta paths");
  run->add_option("--weights", o.weights, "equal | heuristic | explicit:<csv>");
  run->add_option("--out", o.out_dir, "output directory");
  run->add_option("--cache-dir", o.cache_dir, "similarity cache directory");
  run->add_option("--seed", o.seed, "experiment seed")->each([&](const std::string&) {
    o.seed_set = true;
  });
  run->add_flag("--deterministic", o.deterministic,
                "single-threaded execution, byte-reproducible outputs");

  std::string ml_in, ml_out;
  std::int64_t ml_subsample = 0;
  std::uint64_t ml_seed = 7;
  CLI::App* prep = app.add_subcommand("prepare-movielens",
                                      "convert raw MovieLens-1M files into a dataset directory");
  prep->add_option("--input", ml_in, "directory with ratings.dat, users.dat, movies.dat")
      ->required();
  prep->add_option("--output", ml_out, "dataset directory to create")->required();
  prep->add_option("--subsample", ml_subsample, "keep only this many ratings (0 = all)");
  prep->add_option("--seed", ml_seed, "subsample seed");

  RunOverrides t;
  std::string train_method, train_out;
  double train_ratio = 0.0;
  int train_trial = 0;
  CLI::App* tr = app.add_subcommand("train", "train one model and save a checkpoint");
  tr->add_option("--config", t.config_path, "experiment config (JSON)")->required();
  tr->add_option("--method", train_method, "pmf | somf | simmf-<codes>")->required();
  tr->add_option("--out", train_out, "checkpoint file to write")->required();
  tr->add_option("--ratio", train_ratio, "train on this split's training part (0 = all ratings)");
  tr->add_option("--trial", train_trial, "split trial index");
  tr->add_option("--alpha", t.alpha, "user-side regularization weight");
  tr->add_option("--beta", t.beta, "item-side regularization weight");
  tr->add_option("--seed", t.seed, "seed")->each([&](const std::string&) { t.seed_set = true; });
  tr->add_flag("--deterministic", t.deterministic, "single-threaded execution");

  std::string ckpt_path, ds_path, user_id, item_id;
  bool clamp = false;
  bool allow_mismatch = false;
  CLI::App* pred = app.add_subcommand("predict", "score one user-item pair from a checkpoint");
  pred->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  pred->add_option("--dataset", ds_path, "dataset directory (for id maps)")->required();
  pred->add_option("--user", user_id, "raw user id")->required();
  pred->add_option("--item", item_id, "raw item id")->required();
  pred->add_flag("--clamp", clamp, "clamp the prediction to the rating scale");
  pred->add_flag("--allow-checksum-mismatch", allow_mismatch,
                 "predict even if the checkpoint was trained on different data");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      simmf::ExperimentConfig cfg = make_config(o);
      simmf::EvalReport report = simmf::run_experiment(cfg);
      std::string baseline = cfg.baseline;
      bool have = false;
      for (const simmf::TrialRow& row : report.rows)
        if (row.method == baseline) have = true;
      if (!have) baseline = report.rows.front().method;
      std::cout << simmf::report_summary(report, baseline);
      std::cout << "results written to " << cfg.out_dir << "\n";
    } else if (prep->parsed()) {
      simmf::convert_movielens(ml_in, ml_out, ml_subsample, ml_seed);
      std::cout << "dataset written to " << ml_out << "\n";
    } else if (tr->parsed()) {
      simmf::ExperimentConfig cfg = make_config(t);
      simmf::SingleTrain st = simmf::train_single(cfg, train_method, train_ratio, train_trial);
      simmf::save_checkpoint(train_out, st.result.model, cfg.train, st.dataset_checksum);
      const simmf::TraceRow& last = st.result.trace.back();
      std::printf("%s: %zu iterations, objective %.6f (%s)\n", train_method.c_str(),
                  st.result.trace.size() - 1, last.objective, st.result.stop_reason.c_str());
      std::cout << "checkpoint written to " << train_out << "\n";
    } else if (pred->parsed()) {
      simmf::Checkpoint ckpt = simmf::load_checkpoint(ckpt_path);
      simmf::HinDataset ds = simmf::load_dataset(ds_path);
      if (ckpt.dataset_checksum != ds.checksum && !allow_mismatch)
        throw simmf::ValidationError(
            "checkpoint was trained on different data than " + ds_path +
            " (pass --allow-checksum-mismatch to override)");
      auto u = ds.id_maps.at(ds.user_type).lookup(user_id);
      auto i = ds.id_maps.at(ds.item_type).lookup(item_id);
      if (!u) throw simmf::ValidationError("unknown user id '" + user_id + "'");
      if (!i) throw simmf::ValidationError("unknown item id '" + item_id + "'");
      double score = simmf::predict(ckpt.model, *u, *i);
      if (clamp) score = ds.ratings.clamp(score);
      std::printf("%.6f\n", score);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
