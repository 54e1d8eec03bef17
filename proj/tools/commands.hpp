#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace topomgr {
namespace cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kDataError = 3;
inline constexpr int kRuntimeError = 4;

struct SimulateOpts {
  std::string config_path;  // optional; defaults from --scenario
  std::string scenario = "a";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> iterations;
  std::string out;  // CSV path; empty -> scenario_<s>.csv
  bool verbose = false;
};

struct TrainEvalOpts {
  std::string data_path;
  std::string scenario;  // empty -> inferred from the CSV
  int top_n = 3;
  std::optional<std::uint64_t> seed;
  std::optional<int> window;
  std::optional<int> horizon;
  std::vector<std::string> kinds;  // empty -> mlp,forest,gbt
  std::string out = "models";
  bool verbose = false;
};

struct CostOpts {
  std::string params_path;  // optional; built-in defaults otherwise
  std::string axis = "monitored_elements";
  std::string range = "5:100:5";  // start:stop:step
  std::string report_path;        // optional train-eval report.json for rates
  std::string out = "cost";
  bool verbose = false;
};

struct ServeOpts {
  std::string config_path;
  std::optional<int> port;
};

struct PredictOpts {
  std::string model_dir;
  std::string input_path;
  bool verbose = false;
};

int cmd_simulate(const SimulateOpts& opts);
int cmd_train_eval(const TrainEvalOpts& opts);
int cmd_cost(const CostOpts& opts);
int cmd_serve(const ServeOpts& opts);
int cmd_predict(const PredictOpts& opts);

}  // namespace cli
}  // namespace topomgr
