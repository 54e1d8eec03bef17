#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "topomgr/provenance.hpp"

using namespace topomgr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json load_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  return json::parse(in);
}

}  // namespace

TEST_CASE("cmd_simulate writes csv, sidecar and manifest; reruns digest-equal") {
  const fs::path dir = fresh_dir("topomgr_cli_sim");
  cli::SimulateOpts opts;
  opts.scenario = "b";
  opts.seed = 99;
  opts.iterations = 400;
  opts.out = (dir / "run1.csv").string();
  REQUIRE(cli::cmd_simulate(opts) == cli::kOk);

  CHECK(fs::exists(dir / "run1.csv"));
  CHECK(fs::exists(dir / "run1.csv.provenance.json"));
  const json manifest = load_json(dir / "run1.csv.manifest.json");
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 99);
  REQUIRE(manifest["outputs"].size() == 2);

  opts.out = (dir / "run2.csv").string();
  REQUIRE(cli::cmd_simulate(opts) == cli::kOk);
  CHECK(file_digest((dir / "run1.csv").string()) ==
        file_digest((dir / "run2.csv").string()));

  // the manifest's recorded output digest matches the file on disk
  CHECK(manifest["outputs"][0]["digest"] ==
        file_digest((dir / "run1.csv").string()));
}

TEST_CASE("cmd_train_eval emits models, reports and a Top-N manifest") {
  const fs::path dir = fresh_dir("topomgr_cli_train");
  cli::SimulateOpts sim_opts;
  sim_opts.scenario = "a";
  sim_opts.seed = 7;
  sim_opts.iterations = 900;
  sim_opts.out = (dir / "data.csv").string();
  REQUIRE(cli::cmd_simulate(sim_opts) == cli::kOk);

  cli::TrainEvalOpts opts;
  opts.data_path = (dir / "data.csv").string();
  opts.top_n = 2;
  opts.seed = 3;
  opts.kinds = {"forest", "gbt"};
  opts.out = (dir / "models").string();
  REQUIRE(cli::cmd_train_eval(opts) == cli::kOk);

  const json topn = load_json(dir / "models" / "topn_a.json");
  CHECK(topn["scenario"] == "A");
  CHECK(topn["models"].size() == 2);
  for (const auto& m : topn["models"])
    CHECK(fs::exists(dir / "models" / m.get<std::string>()));
  CHECK(fs::exists(dir / "models" / "report.txt"));
  const json report = load_json(dir / "models" / "report.json");
  CHECK(report["models"].size() == 2);
  CHECK(fs::exists(dir / "models" / "report.csv"));
  CHECK(fs::exists(dir / "models" / "run_manifest.json"));

  // reruns reproduce identical model files and metric values
  cli::TrainEvalOpts again = opts;
  again.out = (dir / "models2").string();
  REQUIRE(cli::cmd_train_eval(again) == cli::kOk);
  const json report2 = load_json(dir / "models2" / "report.json");
  for (std::size_t i = 0; i < report["models"].size(); ++i) {
    CHECK(report["models"][i]["accuracy"] == report2["models"][i]["accuracy"]);
    CHECK(report["models"][i]["mse"] == report2["models"][i]["mse"]);
  }
  for (const auto& m : topn["models"]) {
    const std::string name = m.get<std::string>();
    CHECK(file_digest((dir / "models" / name).string()) ==
          file_digest((dir / "models2" / name).string()));
  }

  // scenario mismatch is a data error
  cli::TrainEvalOpts bad = opts;
  bad.scenario = "b";
  CHECK(cli::cmd_train_eval(bad) == cli::kDataError);
}

TEST_CASE("cmd_cost writes the sweep csv and svg") {
  const fs::path dir = fresh_dir("topomgr_cli_cost");
  cli::CostOpts opts;
  opts.axis = "monitored_elements";
  opts.range = "5:50:5";
  opts.out = (dir / "cost").string();
  REQUIRE(cli::cmd_cost(opts) == cli::kOk);

  std::ifstream csv(dir / "cost" / "cost_monitored_elements.csv");
  REQUIRE(csv);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "x,series,cost");
  std::size_t hw = 0, sw = 0, cloud = 0;
  std::string line;
  while (std::getline(csv, line)) {
    if (line.find(",hw,") != std::string::npos) ++hw;
    if (line.find(",sw,") != std::string::npos) ++sw;
    if (line.find(",cloud,") != std::string::npos) ++cloud;
  }
  CHECK(hw == 10);
  CHECK(sw == 10);
  CHECK(cloud == 10);

  std::ifstream svg(dir / "cost" / "cost_monitored_elements.svg");
  std::stringstream ss;
  ss << svg.rdbuf();
  CHECK(ss.str().find("<svg") != std::string::npos);
  CHECK(ss.str().find("polyline") != std::string::npos);

  cli::CostOpts pods = opts;
  pods.axis = "inference_pods";
  pods.range = "1:10:1";
  REQUIRE(cli::cmd_cost(pods) == cli::kOk);
  CHECK(fs::exists(dir / "cost" / "cost_inference_pods.csv"));

  cli::CostOpts bad = opts;
  bad.range = "10:1:1";
  CHECK(cli::cmd_cost(bad) == cli::kConfigError);
  bad.range = "oops";
  CHECK(cli::cmd_cost(bad) == cli::kConfigError);
}

TEST_CASE("cmd_predict votes over a sample file; missing models error") {
  const fs::path dir = fresh_dir("topomgr_cli_predict");
  cli::SimulateOpts sim_opts;
  sim_opts.scenario = "a";
  sim_opts.seed = 5;
  sim_opts.iterations = 600;
  sim_opts.out = (dir / "data.csv").string();
  REQUIRE(cli::cmd_simulate(sim_opts) == cli::kOk);

  cli::TrainEvalOpts te;
  te.data_path = (dir / "data.csv").string();
  te.top_n = 3;
  te.seed = 2;
  te.kinds = {"gbt"};
  te.out = (dir / "models").string();
  REQUIRE(cli::cmd_train_eval(te) == cli::kOk);

  cli::PredictOpts opts;
  opts.model_dir = (dir / "models").string();
  opts.input_path = (dir / "data.csv").string();
  opts.verbose = true;
  CHECK(cli::cmd_predict(opts) == cli::kOk);

  opts.model_dir = (dir / "nope").string();
  CHECK(cli::cmd_predict(opts) == cli::kConfigError);

  cli::ServeOpts serve;
  serve.config_path = "";  // no config: not ready
  CHECK(cli::cmd_serve(serve) == cli::kConfigError);
}

TEST_CASE("command error codes for bad inputs") {
  cli::SimulateOpts sim_opts;
  sim_opts.config_path = "/nonexistent/config.json";
  CHECK(cli::cmd_simulate(sim_opts) == cli::kConfigError);

  cli::TrainEvalOpts te;
  te.data_path = "/nonexistent/data.csv";
  CHECK(cli::cmd_train_eval(te) == cli::kDataError);
}
