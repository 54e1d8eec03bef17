#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "topomgr/cost.hpp"
#include "topomgr/dataset.hpp"
#include "topomgr/pipeline.hpp"
#include "topomgr/provenance.hpp"
#include "topomgr/service.hpp"
#include "topomgr/sim.hpp"

namespace topomgr {
namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_guarded(const char* what, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << what << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << what << ": " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << what << ": " << e.what() << "\n";
    return kRuntimeError;
  }
}

void ensure_parent_dir(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

// --- simulate ----------------------------------------------------------------

int cmd_simulate(const SimulateOpts& opts) {
  return run_guarded("simulate", [&]() {
    const auto t0 = std::chrono::steady_clock::now();
    sim::SimConfig cfg = opts.config_path.empty()
                             ? sim::default_config(scenario_from_string(opts.scenario))
                             : sim::load_sim_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.iterations) cfg.iterations = *opts.iterations;

    const data::Dataset ds = sim::run_scenario(cfg);

    const std::string csv_path =
        opts.out.empty()
            ? "scenario_" + std::string(cfg.scenario == Scenario::A ? "a" : "b") + ".csv"
            : opts.out;
    ensure_parent_dir(csv_path);
    data::write_csv(ds, csv_path);
    data::write_provenance_sidecar(ds, csv_path);

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.config_digest = sim::sim_config_digest(cfg);
    manifest.seed = cfg.seed;
    if (!opts.config_path.empty()) manifest.add_input(opts.config_path);
    manifest.add_output(csv_path);
    manifest.add_output(csv_path + ".provenance.json");
    manifest.total_seconds = elapsed_s(t0);
    manifest.created_at = iso8601_utc_now();
    manifest.write(csv_path + ".manifest.json");

    std::cout << "wrote " << ds.n_rows() << " rows to " << csv_path << "\n";
    return kOk;
  });
}

// --- train-eval ----------------------------------------------------------------

int cmd_train_eval(const TrainEvalOpts& opts) {
  return run_guarded("train-eval", [&]() {
    const auto t0 = std::chrono::steady_clock::now();
    const data::Dataset ds = data::read_csv(opts.data_path);
    const Scenario scenario = opts.scenario.empty()
                                  ? ds.scenario
                                  : scenario_from_string(opts.scenario);
    if (scenario != ds.scenario)
      throw DataError("dataset scenario does not match --scenario");

    pipeline::PipelineOptions popts = pipeline::PipelineOptions::for_scenario(scenario);
    if (opts.window) popts.window = *opts.window;
    if (opts.horizon) popts.horizon = *opts.horizon;
    if (!opts.kinds.empty()) {
      popts.kinds.clear();
      for (const auto& k : opts.kinds)
        popts.kinds.push_back(ml::model_kind_from_string(k));
    }
    const std::uint64_t seed = opts.seed.value_or(1);

    const pipeline::PipelineResult result =
        pipeline::run_pipeline(ds, scenario, opts.top_n, popts, seed);

    fs::create_directories(opts.out);
    RunManifest manifest;
    manifest.command = "train-eval";
    manifest.config_digest = ds.provenance.config_digest;
    manifest.seed = seed;
    manifest.add_input(opts.data_path);

    // one model file per trained kind; the Top-N manifest lists the
    // ranked subset by file name
    std::map<std::string, std::string> file_of;
    for (const auto& rm : result.all) {
      const std::string name = rm.report.model_id + ".model.json";
      const fs::path path = fs::path(opts.out) / name;
      ml::save_model(rm.model, path.string());
      file_of[rm.report.model_id] = name;
      manifest.add_output(path.string());
    }
    {
      json topn;
      topn["scenario"] = to_string(scenario);
      topn["window"] = result.window;
      topn["horizon"] = result.horizon;
      json models = json::array();
      for (const auto& rm : result.top.entries)
        models.push_back(file_of.at(rm.report.model_id));
      topn["models"] = models;
      const fs::path path =
          fs::path(opts.out) /
          (scenario == Scenario::A ? "topn_a.json" : "topn_b.json");
      std::ofstream out(path);
      out << topn.dump(2) << "\n";
      manifest.add_output(path.string());
    }
    {
      const fs::path txt = fs::path(opts.out) / "report.txt";
      std::ofstream out(txt);
      out << pipeline::render_report(result);
      manifest.add_output(txt.string());
    }
    {
      const fs::path jsn = fs::path(opts.out) / "report.json";
      std::ofstream out(jsn);
      out << pipeline::report_to_json(result) << "\n";
      manifest.add_output(jsn.string());
    }
    {
      // full-precision metrics; display rounding happens only in report.txt
      const fs::path csv = fs::path(opts.out) / "report.csv";
      std::ofstream out(csv);
      out << "model_id,accuracy,mse,training_time_s,inference_time_us\n";
      out.precision(17);
      for (const auto& rm : result.all)
        out << rm.report.model_id << ',' << rm.report.accuracy << ','
            << rm.report.mse << ',' << rm.report.training_time_s << ','
            << rm.report.inference_time_us << "\n";
      manifest.add_output(csv.string());
    }
    manifest.total_seconds = elapsed_s(t0);
    manifest.created_at = iso8601_utc_now();
    manifest.write((fs::path(opts.out) / "run_manifest.json").string());

    std::cout << pipeline::render_report(result);
    if (opts.verbose) {
      std::cout << "\nmodel files written to " << opts.out << "\n";
    }
    return kOk;
  });
}

// --- cost ----------------------------------------------------------------------

namespace {

std::vector<double> parse_range(const std::string& spec) {
  double start = 0, stop = 0, step = 1;
  char c1 = 0, c2 = 0;
  std::istringstream ss(spec);
  if (!(ss >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':')
    throw ConfigError("range must be start:stop:step, got '" + spec + "'");
  if (step <= 0) throw ConfigError("range step must be > 0");
  std::vector<double> out;
  for (double x = start; x <= stop + 1e-9; x += step) out.push_back(x);
  if (out.empty()) throw ConfigError("empty sweep range");
  return out;
}

// Minimal self-contained SVG line chart; series are colored from a fixed
// palette and labeled in a legend.
std::string render_svg(const std::vector<cost::SweepPoint>& points,
                       const std::string& x_label) {
  std::vector<std::string> series;
  for (const auto& p : points)
    if (std::find(series.begin(), series.end(), p.series) == series.end())
      series.push_back(p.series);

  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.cost);
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;

  const double w = 640, h = 420, ml = 70, mr = 20, mt = 20, mb = 50;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto sy = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                  "#d62728", "#9467bd", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='"
      << h << "' viewBox='0 0 " << w << " " << h << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr
      << "' y2='" << h - mb << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << h - mb << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    svg << "<text x='" << sx(xv) << "' y='" << h - mb + 18
        << "' font-size='11' text-anchor='middle'>" << xv << "</text>\n";
    svg << "<text x='" << ml - 8 << "' y='" << sy(yv) + 4
        << "' font-size='11' text-anchor='end'>" << yv << "</text>\n";
  }
  svg << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 10
      << "' font-size='12' text-anchor='middle'>" << x_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    svg << "<polyline fill='none' stroke='" << palette[s % 6]
        << "' stroke-width='2' points='";
    for (const auto& p : points)
      if (p.series == series[s]) svg << sx(p.x) << "," << sy(p.cost) << " ";
    svg << "'/>\n";
    svg << "<text x='" << w - mr - 120 << "' y='" << mt + 16 * (s + 1)
        << "' font-size='12' fill='" << palette[s % 6] << "'>" << series[s]
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

int cmd_cost(const CostOpts& opts) {
  return run_guarded("cost", [&]() {
    const auto t0 = std::chrono::steady_clock::now();
    cost::CostConfig cfg = opts.params_path.empty()
                               ? cost::default_cost_config()
                               : cost::load_cost_config(opts.params_path);

    if (!opts.report_path.empty()) {
      // pull measured service rates from a train-eval report
      std::ifstream in(opts.report_path);
      if (!in) throw ConfigError("cannot open report: " + opts.report_path);
      json rep = json::parse(in, nullptr, false);
      if (rep.is_discarded())
        throw ConfigError("report is not valid JSON: " + opts.report_path);
      cfg.models.clear();
      for (const auto& jm : rep.value("models", json::array()))
        cfg.models.push_back({jm.at("model_id").get<std::string>(),
                              jm.value("inference_time_us", 1.0),
                              std::max(jm.value("training_time_s", 1.0), 1e-6)});
    }

    cost::SweepAxis axis;
    if (opts.axis == "monitored_elements")
      axis = cost::SweepAxis::MonitoredElements;
    else if (opts.axis == "inference_pods")
      axis = cost::SweepAxis::InferencePods;
    else
      throw ConfigError("axis must be monitored_elements or inference_pods");

    const std::vector<double> range = parse_range(opts.range);
    const auto points = cost::sweep(axis, range, cfg);

    fs::create_directories(opts.out);
    const fs::path csv = fs::path(opts.out) / ("cost_" + opts.axis + ".csv");
    {
      std::ofstream out(csv);
      out << "x,series,cost\n";
      out.precision(17);
      for (const auto& p : points)
        out << p.x << ',' << p.series << ',' << p.cost << "\n";
    }
    const fs::path svg = fs::path(opts.out) / ("cost_" + opts.axis + ".svg");
    {
      std::ofstream out(svg);
      out << render_svg(points, opts.axis);
    }

    RunManifest manifest;
    manifest.command = "cost";
    if (!opts.params_path.empty()) manifest.add_input(opts.params_path);
    if (!opts.report_path.empty()) manifest.add_input(opts.report_path);
    manifest.add_output(csv.string());
    manifest.add_output(svg.string());
    manifest.total_seconds = elapsed_s(t0);
    manifest.created_at = iso8601_utc_now();
    manifest.write((fs::path(opts.out) / "run_manifest.json").string());

    std::cout << "wrote " << csv.string() << " and " << svg.string() << "\n";
    return kOk;
  });
}

// --- serve ---------------------------------------------------------------------

int cmd_serve(const ServeOpts& opts) {
  return run_guarded("serve", [&]() {
    if (opts.config_path.empty())
      throw ConfigError("serve needs --config with topology and model_dir");
    service::ServiceConfig cfg = service::load_service_config(opts.config_path);
    if (opts.port) cfg.port = *opts.port;
    service::TopologyService svc(cfg);  // throws "not ready" without models
    std::cout << "listening on 0.0.0.0:" << cfg.port << "\n";
    svc.run();
    return kOk;
  });
}

// --- predict -------------------------------------------------------------------

int cmd_predict(const PredictOpts& opts) {
  return run_guarded("predict", [&]() {
    if (opts.model_dir.empty()) throw ConfigError("predict needs --models");
    const data::Dataset ds = data::read_csv(opts.input_path);

    const fs::path manifest_path =
        fs::path(opts.model_dir) /
        (ds.scenario == Scenario::A ? "topn_a.json" : "topn_b.json");
    std::ifstream in(manifest_path);
    if (!in)
      throw ConfigError("missing models: no " + manifest_path.string());
    json manifest = json::parse(in, nullptr, false);
    if (manifest.is_discarded())
      throw ConfigError("malformed Top-N manifest: " + manifest_path.string());

    pipeline::TopN top;
    for (const auto& jm : manifest.value("models", json::array())) {
      ml::TrainedModel model =
          ml::load_model((fs::path(opts.model_dir) / jm.get<std::string>()).string());
      pipeline::EvalReport rep;
      rep.model_id = model.id();
      rep.accuracy = model.eval_accuracy;
      rep.mse = model.eval_mse;
      top.entries.push_back({std::move(model), std::move(rep)});
    }
    if (top.entries.empty()) throw ConfigError("missing models: empty manifest");

    const int window = manifest.value("window", 1);
    pipeline::FeatureWindower windower(window);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
      const auto flat = windower.push("input", ds.row(i));
      if (!flat) {
        std::cout << ds.steps[i] << ",warmup\n";
        continue;
      }
      const pipeline::VoteDetail vd = pipeline::vote_detail(top, *flat);
      std::cout << ds.steps[i] << "," << vd.decision;
      if (opts.verbose) {
        for (std::size_t m = 0; m < vd.votes.size(); ++m)
          std::cout << "," << top.entries[m].report.model_id << "="
                    << vd.votes[m];
      }
      std::cout << "\n";
    }
    return kOk;
  });
}

}  // namespace cli
}  // namespace topomgr
