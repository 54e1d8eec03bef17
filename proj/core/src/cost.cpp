#include "topomgr/cost.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace topomgr {
namespace cost {

using nlohmann::json;

std::string to_string(MonitoringType t) {
  switch (t) {
    case MonitoringType::Hw: return "hw";
    case MonitoringType::Sw: return "sw";
    case MonitoringType::Cloud: return "cloud";
  }
  return "?";
}

MonitoringType monitoring_type_from_string(const std::string& s) {
  if (s == "hw") return MonitoringType::Hw;
  if (s == "sw") return MonitoringType::Sw;
  if (s == "cloud") return MonitoringType::Cloud;
  throw ConfigError("unknown monitoring type: " + s);
}

namespace {

void require_non_negative(double v, const char* name) {
  if (v < 0.0 || !std::isfinite(v))
    throw ConfigError(std::string("negative or non-finite ") + name);
}

}  // namespace

double cost_monitoring_solution(MonitoringType type,
                                const MonitoringCostParams& params) {
  switch (type) {
    case MonitoringType::Hw: {
      const auto& p = params.hw;
      require_non_negative(p.n_device, "n_device");
      require_non_negative(p.c_device, "c_device");
      require_non_negative(p.c_maintenance, "c_maintenance_hw");
      return p.n_device * (p.c_device + p.c_maintenance);
    }
    case MonitoringType::Sw: {
      const auto& p = params.sw;
      require_non_negative(p.c_setup, "c_setup");
      require_non_negative(p.c_subscription, "c_subscription");
      require_non_negative(p.n_vm, "n_vm");
      require_non_negative(p.c_vm, "c_vm");
      require_non_negative(p.c_maintenance, "c_maintenance_sw");
      return p.c_setup + p.c_subscription + p.n_vm * p.c_vm + p.c_maintenance;
    }
    case MonitoringType::Cloud: {
      const auto& p = params.cloud;
      require_non_negative(p.c_subscription, "c_subscription");
      require_non_negative(p.n_endpoint, "n_endpoint");
      require_non_negative(p.c_endpoint, "c_endpoint");
      require_non_negative(p.c_storage, "c_storage");
      return p.c_subscription + p.n_endpoint * p.c_endpoint + p.c_storage;
    }
  }
  throw ConfigError("unknown monitoring type");
}

double utilization(double lambda, double mu, double n_server) {
  if (mu <= 0.0) throw ConfigError("service rate mu must be > 0");
  if (n_server < 1.0) throw ConfigError("n_server must be >= 1");
  require_non_negative(lambda, "lambda");
  const double u = lambda / (n_server * mu);
  if (u > 1.0)
    throw DataError("unstable queue: utilization " + std::to_string(u) +
                    " exceeds 1");
  return u;
}

double energy_total(const EnergyParams& params) {
  require_non_negative(params.p_idle, "p_idle");
  require_non_negative(params.p_peak, "p_peak");
  const double u = utilization(params.lambda, params.mu, params.n_server);
  const double idle_term =
      params.p_idle + (params.e_usage - 1.0) * params.p_peak;
  return params.n_server *
         (idle_term + (params.p_peak - params.p_idle) * u);
}

double cost_monitoring_total(MonitoringType type,
                             const MonitoringCostParams& params,
                             const std::optional<EnergyParams>& energy,
                             double currency_per_kw, bool energy_for_all,
                             bool* energy_ignored) {
  const double base = cost_monitoring_solution(type, params);
  if (energy_ignored) *energy_ignored = false;
  if (!energy) return base;
  // Energy is owned by the network only for the cloud deployment; other
  // types ignore a supplied energy term.
  if (type != MonitoringType::Cloud && !energy_for_all) {
    if (energy_ignored) *energy_ignored = true;
    return base;
  }
  return base + currency_per_kw * energy_total(*energy);
}

double cost_ml_total(const MlCostParams& params, double currency_per_kw) {
  require_non_negative(params.c_maintenance, "c_maintenance_ml");
  return params.c_maintenance +
         currency_per_kw * (energy_total(params.train) +
                            energy_total(params.inference));
}

CostConfig default_cost_config() {
  CostConfig cfg;
  cfg.monitoring.hw = {10.0, 1000.0, 50.0};
  cfg.monitoring.sw = {2000.0, 1000.0, 10.0, 200.0, 300.0};
  cfg.monitoring.cloud = {1200.0, 10.0, 10.0, 100.0};
  cfg.monitoring_energy = {0.2, 0.1, 1.2, 1.0, 10.0, 100.0};
  cfg.currency_per_kw = 1000.0;
  cfg.energy_for_all_types = false;
  cfg.ml.c_maintenance = 100.0;
  cfg.ml.train = {0.2, 0.1, 1.2, 1.0, 1e-4, 0.5};
  cfg.ml.inference = {0.2, 0.1, 1.2, 1.0, 100.0, 1e6};
  cfg.models = {{"mlp", 1.0, 2.0}, {"forest", 8.0, 0.3}, {"gbt", 3.0, 0.4}};
  return cfg;
}

std::vector<SweepPoint> sweep(SweepAxis axis, const std::vector<double>& range,
                              const CostConfig& config) {
  if (range.empty()) throw ConfigError("sweep range is empty");
  for (std::size_t i = 1; i < range.size(); ++i)
    if (range[i] <= range[i - 1])
      throw ConfigError("sweep range must be strictly ascending");

  std::vector<SweepPoint> out;
  if (axis == SweepAxis::MonitoredElements) {
    for (double x : range) {
      MonitoringCostParams p = config.monitoring;
      p.hw.n_device = x;
      p.sw.n_vm = x;
      p.cloud.n_endpoint = x;
      out.push_back({x, "hw",
                     cost_monitoring_total(MonitoringType::Hw, p, std::nullopt,
                                           config.currency_per_kw,
                                           config.energy_for_all_types)});
      out.push_back({x, "sw",
                     cost_monitoring_total(MonitoringType::Sw, p, std::nullopt,
                                           config.currency_per_kw,
                                           config.energy_for_all_types)});
      out.push_back({x, "cloud",
                     cost_monitoring_total(MonitoringType::Cloud, p,
                                           config.monitoring_energy,
                                           config.currency_per_kw,
                                           config.energy_for_all_types)});
    }
    return out;
  }

  if (config.models.empty())
    throw ConfigError("ML sweep needs per-model service rates");
  for (const auto& m : config.models) {
    if (m.inference_time_us <= 0.0 || m.training_time_s <= 0.0)
      throw ConfigError("model service times must be > 0: " + m.name);
    for (double x : range) {
      MlCostParams p = config.ml;
      p.inference.n_server = x;
      p.inference.mu = 1e6 / m.inference_time_us;  // requests per second
      p.train.mu = 1.0 / m.training_time_s;        // trainings per second
      out.push_back({x, m.name, cost_ml_total(p, config.currency_per_kw)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

EnergyParams energy_from_json(const json& j, const EnergyParams& defaults) {
  EnergyParams p = defaults;
  p.p_idle = j.value("p_idle", p.p_idle);
  p.p_peak = j.value("p_peak", p.p_peak);
  p.e_usage = j.value("e_usage", p.e_usage);
  p.n_server = j.value("n_server", p.n_server);
  p.lambda = j.value("lambda", p.lambda);
  p.mu = j.value("mu", p.mu);
  return p;
}

}  // namespace

CostConfig parse_cost_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cost config is not valid JSON: ") + e.what());
  }
  CostConfig cfg = default_cost_config();
  try {
    cfg.currency_per_kw = j.value("currency_per_kw", cfg.currency_per_kw);
    cfg.energy_for_all_types =
        j.value("energy_for_all_types", cfg.energy_for_all_types);
    if (j.contains("monitoring")) {
      const json& m = j["monitoring"];
      if (m.contains("hw")) {
        cfg.monitoring.hw.n_device = m["hw"].value("n_device", cfg.monitoring.hw.n_device);
        cfg.monitoring.hw.c_device = m["hw"].value("c_device", cfg.monitoring.hw.c_device);
        cfg.monitoring.hw.c_maintenance =
            m["hw"].value("c_maintenance", cfg.monitoring.hw.c_maintenance);
      }
      if (m.contains("sw")) {
        cfg.monitoring.sw.c_setup = m["sw"].value("c_setup", cfg.monitoring.sw.c_setup);
        cfg.monitoring.sw.c_subscription =
            m["sw"].value("c_subscription", cfg.monitoring.sw.c_subscription);
        cfg.monitoring.sw.n_vm = m["sw"].value("n_vm", cfg.monitoring.sw.n_vm);
        cfg.monitoring.sw.c_vm = m["sw"].value("c_vm", cfg.monitoring.sw.c_vm);
        cfg.monitoring.sw.c_maintenance =
            m["sw"].value("c_maintenance", cfg.monitoring.sw.c_maintenance);
      }
      if (m.contains("cloud")) {
        cfg.monitoring.cloud.c_subscription =
            m["cloud"].value("c_subscription", cfg.monitoring.cloud.c_subscription);
        cfg.monitoring.cloud.n_endpoint =
            m["cloud"].value("n_endpoint", cfg.monitoring.cloud.n_endpoint);
        cfg.monitoring.cloud.c_endpoint =
            m["cloud"].value("c_endpoint", cfg.monitoring.cloud.c_endpoint);
        cfg.monitoring.cloud.c_storage =
            m["cloud"].value("c_storage", cfg.monitoring.cloud.c_storage);
      }
    }
    if (j.contains("monitoring_energy"))
      cfg.monitoring_energy =
          energy_from_json(j["monitoring_energy"], cfg.monitoring_energy);
    if (j.contains("ml")) {
      const json& m = j["ml"];
      cfg.ml.c_maintenance = m.value("c_maintenance", cfg.ml.c_maintenance);
      if (m.contains("train")) cfg.ml.train = energy_from_json(m["train"], cfg.ml.train);
      if (m.contains("inference"))
        cfg.ml.inference = energy_from_json(m["inference"], cfg.ml.inference);
    }
    if (j.contains("models")) {
      cfg.models.clear();
      for (const auto& jm : j["models"]) {
        ModelRates r;
        r.name = jm.at("name").get<std::string>();
        r.inference_time_us = jm.value("inference_time_us", 1.0);
        r.training_time_s = jm.value("training_time_s", 1.0);
        cfg.models.push_back(std::move(r));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed cost config: ") + e.what());
  }
  return cfg;
}

CostConfig load_cost_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open cost config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_cost_config(ss.str());
}

}  // namespace cost
}  // namespace topomgr
