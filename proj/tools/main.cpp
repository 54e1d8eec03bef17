#include <CLI11.hpp>

#include "commands.hpp"
#include "topomgr/provenance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"6G sub-network topology management toolkit"};
  app.set_version_flag("--version", topomgr::kToolVersion);
  app.require_subcommand(1);

  topomgr::cli::SimulateOpts sim_opts;
  auto* simulate = app.add_subcommand(
      "simulate", "Generate a labeled topology-change dataset");
  simulate->add_option("--config", sim_opts.config_path, "Sim config JSON");
  simulate->add_option("--scenario", sim_opts.scenario, "a or b")
      ->check(CLI::IsMember({"a", "b", "A", "B"}));
  simulate->add_option("--seed", sim_opts.seed, "Seed override");
  simulate->add_option("--iterations", sim_opts.iterations, "Sample count override");
  simulate->add_option("--out", sim_opts.out, "Output CSV path");
  simulate->add_flag("--verbose", sim_opts.verbose);

  topomgr::cli::TrainEvalOpts te_opts;
  auto* train_eval = app.add_subcommand(
      "train-eval", "Grid-search, train and evaluate the model set");
  train_eval->add_option("--data", te_opts.data_path, "Dataset CSV")->required();
  train_eval->add_option("--scenario", te_opts.scenario, "a or b (default: inferred)");
  train_eval->add_option("--top-n", te_opts.top_n, "Models kept for voting");
  train_eval->add_option("--seed", te_opts.seed, "Training seed");
  train_eval->add_option("--window", te_opts.window, "History window W");
  train_eval->add_option("--horizon", te_opts.horizon, "Prediction horizon H");
  train_eval->add_option("--kinds", te_opts.kinds, "Subset of mlp,forest,gbt");
  train_eval->add_option("--out", te_opts.out, "Output directory");
  train_eval->add_flag("--verbose", te_opts.verbose);

  topomgr::cli::CostOpts cost_opts;
  auto* cost = app.add_subcommand("cost", "Monitoring vs ML cost sweeps");
  cost->add_option("--params", cost_opts.params_path, "Cost params JSON");
  cost->add_option("--axis", cost_opts.axis,
                   "monitored_elements or inference_pods");
  cost->add_option("--range", cost_opts.range, "start:stop:step");
  cost->add_option("--report", cost_opts.report_path,
                   "train-eval report.json supplying measured service rates");
  cost->add_option("--out", cost_opts.out, "Output directory");
  cost->add_flag("--verbose", cost_opts.verbose);

  topomgr::cli::ServeOpts serve_opts;
  auto* serve = app.add_subcommand("serve", "Run the topology API service");
  serve->add_option("--config", serve_opts.config_path, "Service config JSON")
      ->required();
  serve->add_option("--port", serve_opts.port, "Port override");

  topomgr::cli::PredictOpts pred_opts;
  auto* predict = app.add_subcommand("predict", "Vote labels for a sample file");
  predict->add_option("--models", pred_opts.model_dir, "Model directory")->required();
  predict->add_option("--input", pred_opts.input_path, "Sample CSV")->required();
  predict->add_flag("--verbose", pred_opts.verbose, "Print per-model votes");

  CLI11_PARSE(app, argc, argv);

  if (simulate->parsed()) return topomgr::cli::cmd_simulate(sim_opts);
  if (train_eval->parsed()) return topomgr::cli::cmd_train_eval(te_opts);
  if (cost->parsed()) return topomgr::cli::cmd_cost(cost_opts);
  if (serve->parsed()) return topomgr::cli::cmd_serve(serve_opts);
  if (predict->parsed()) return topomgr::cli::cmd_predict(pred_opts);
  return topomgr::cli::kRuntimeError;
}
