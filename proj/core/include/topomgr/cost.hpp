#pragma once

#include <optional>
#include <string>
#include <vector>

#include "topomgr/topology.hpp"

namespace topomgr {
namespace cost {

enum class MonitoringType { Hw, Sw, Cloud };

std::string to_string(MonitoringType t);
MonitoringType monitoring_type_from_string(const std::string& s);

struct HwParams {
  double n_device = 0.0;
  double c_device = 0.0;
  double c_maintenance = 0.0;  // per device, per year
};

struct SwParams {
  double c_setup = 0.0;
  double c_subscription = 0.0;
  double n_vm = 0.0;
  double c_vm = 0.0;
  double c_maintenance = 0.0;
};

struct CloudParams {
  double c_subscription = 0.0;
  double n_endpoint = 0.0;
  double c_endpoint = 0.0;
  double c_storage = 0.0;
};

struct MonitoringCostParams {
  HwParams hw;
  SwParams sw;
  CloudParams cloud;
};

// Note: the reference operating point deliberately has p_idle > p_peak,
// which makes the utilization term negative (energy drops as load
// rises). Both values are config-exposed; see the docs.
struct EnergyParams {
  double p_idle = 0.2;   // kW
  double p_peak = 0.1;   // kW
  double e_usage = 1.2;  // cooling/overhead factor
  double n_server = 1.0;
  double lambda = 0.0;  // workload arrival rate, 1/s
  double mu = 1.0;      // service rate, 1/s
};

struct MlCostParams {
  double c_maintenance = 0.0;  // pods, per year
  EnergyParams train;
  EnergyParams inference;
};

// hw:    n_device * (c_device + c_maintenance)
// sw:    c_setup + c_subscription + n_vm * c_vm + c_maintenance
// cloud: c_subscription + n_endpoint * c_endpoint + c_storage
double cost_monitoring_solution(MonitoringType type,
                                const MonitoringCostParams& params);

// lambda / (n_server * mu); throws DataError when the queue is unstable
// (result > 1).
double utilization(double lambda, double mu, double n_server);

// n_server * [(p_idle + (e_usage - 1) p_peak) + (p_peak - p_idle) U], kW.
double energy_total(const EnergyParams& params);

// Cost(type) plus the energy term priced at currency_per_kw -- for the
// cloud type only, unless energy_for_all is set. Energy passed for a
// non-cloud type is ignored; *energy_ignored reports that.
double cost_monitoring_total(MonitoringType type,
                             const MonitoringCostParams& params,
                             const std::optional<EnergyParams>& energy,
                             double currency_per_kw,
                             bool energy_for_all = false,
                             bool* energy_ignored = nullptr);

// c_maintenance + currency_per_kw * (E_total(train) + E_total(inference))
double cost_ml_total(const MlCostParams& params, double currency_per_kw);

enum class SweepAxis { MonitoredElements, InferencePods };

struct SweepPoint {
  double x = 0.0;
  std::string series;
  double cost = 0.0;
};

struct ModelRates {
  std::string name;
  double inference_time_us = 1.0;  // mu_inference = 1e6 / this
  double training_time_s = 1.0;    // mu_train = 1 / this
};

struct CostConfig {
  MonitoringCostParams monitoring;
  EnergyParams monitoring_energy;  // cloud energy term of the sweep
  double currency_per_kw = 1000.0;
  bool energy_for_all_types = false;
  MlCostParams ml;  // inference.mu is filled per model from `models`
  std::vector<ModelRates> models;
};

CostConfig default_cost_config();
CostConfig parse_cost_config(const std::string& json_text);
CostConfig load_cost_config(const std::string& path);

// MonitoredElements: x drives n_device / n_vm / n_endpoint, one series
// per monitoring solution. InferencePods: x drives the inference
// n_server, one series per model with mu taken from its measured rates.
std::vector<SweepPoint> sweep(SweepAxis axis, const std::vector<double>& range,
                              const CostConfig& config);

}  // namespace cost
}  // namespace topomgr
