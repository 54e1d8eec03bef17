#include <doctest.h>

#include <cmath>

#include "topomgr/cost.hpp"
#include "topomgr/rng.hpp"

using namespace topomgr;
using namespace topomgr::cost;

TEST_CASE("monitoring solution costs: hand-evaluated spot values") {
  MonitoringCostParams p;
  p.hw = {10, 500, 50};
  CHECK(cost_monitoring_solution(MonitoringType::Hw, p) == 5500.0);
  p.sw = {2000, 1000, 3, 200, 300};
  CHECK(cost_monitoring_solution(MonitoringType::Sw, p) == 3900.0);
  p.cloud = {1200, 50, 10, 100};
  CHECK(cost_monitoring_solution(MonitoringType::Cloud, p) == 1800.0);

  p.hw.c_device = -1;
  CHECK_THROWS_AS(cost_monitoring_solution(MonitoringType::Hw, p), ConfigError);
}

TEST_CASE("utilization: idle, saturation, hand value, overload") {
  CHECK(utilization(0, 10, 1) == 0.0);
  CHECK(utilization(10, 10, 1) == 1.0);
  CHECK(utilization(5, 10, 1) == 0.5);
  CHECK(utilization(10, 1, 20) == 0.5);
  CHECK_THROWS_AS(utilization(11, 10, 1), DataError);
  CHECK_THROWS_AS(utilization(1, 0, 1), ConfigError);
}

TEST_CASE("energy_total: reference operating point") {
  EnergyParams p;  // p_idle 0.2, p_peak 0.1, e_usage 1.2, 1 server
  SUBCASE("idle") {
    p.lambda = 0;
    p.mu = 10;
    CHECK(energy_total(p) == doctest::Approx(0.22).epsilon(1e-12));
  }
  SUBCASE("saturated: utilization lowers energy under these values") {
    p.lambda = 10;
    p.mu = 10;
    CHECK(energy_total(p) == doctest::Approx(0.12).epsilon(1e-12));
  }
  SUBCASE("half load") {
    p.lambda = 5;
    p.mu = 10;
    CHECK(energy_total(p) == doctest::Approx(0.17).epsilon(1e-12));
  }
}

TEST_CASE("energy and cost formulas match an independent oracle on random params") {
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    EnergyParams e;
    e.p_idle = rng.uniform(0, 1);
    e.p_peak = rng.uniform(0, 1);
    e.e_usage = rng.uniform(1, 2);
    e.n_server = 1 + static_cast<double>(rng.uniform_int(20));
    e.mu = rng.uniform(0.1, 50);
    e.lambda = rng.uniform(0, 1.0) * e.n_server * e.mu;  // stable by construction

    const double u = e.lambda / (e.n_server * e.mu);
    const double expected =
        e.n_server *
        ((e.p_idle + (e.e_usage - 1.0) * e.p_peak) + (e.p_peak - e.p_idle) * u);
    CHECK(energy_total(e) == doctest::Approx(expected).epsilon(1e-12));

    MonitoringCostParams m;
    m.hw = {static_cast<double>(rng.uniform_int(100)), rng.uniform(0, 5000),
            rng.uniform(0, 500)};
    m.sw = {rng.uniform(0, 5000), rng.uniform(0, 2000),
            static_cast<double>(rng.uniform_int(50)), rng.uniform(0, 400),
            rng.uniform(0, 500)};
    m.cloud = {rng.uniform(0, 2000), static_cast<double>(rng.uniform_int(200)),
               rng.uniform(0, 50), rng.uniform(0, 300)};
    CHECK(cost_monitoring_solution(MonitoringType::Hw, m) ==
          doctest::Approx(m.hw.n_device * (m.hw.c_device + m.hw.c_maintenance))
              .epsilon(1e-12));
    CHECK(cost_monitoring_solution(MonitoringType::Sw, m) ==
          doctest::Approx(m.sw.c_setup + m.sw.c_subscription +
                          m.sw.n_vm * m.sw.c_vm + m.sw.c_maintenance)
              .epsilon(1e-12));
    CHECK(cost_monitoring_solution(MonitoringType::Cloud, m) ==
          doctest::Approx(m.cloud.c_subscription +
                          m.cloud.n_endpoint * m.cloud.c_endpoint +
                          m.cloud.c_storage)
              .epsilon(1e-12));
  }
}

TEST_CASE("cost_monitoring_total: energy only prices into the cloud type") {
  MonitoringCostParams m;
  m.hw = {10, 500, 50};
  m.cloud = {1200, 50, 10, 100};
  EnergyParams idle;  // 0.22 kW
  idle.lambda = 0;
  idle.mu = 10;

  bool ignored = false;
  const double hw = cost_monitoring_total(MonitoringType::Hw, m, idle, 1000.0,
                                          false, &ignored);
  CHECK(hw == 5500.0);
  CHECK(ignored);  // supplied energy is ignored for non-cloud types

  const double cloud = cost_monitoring_total(MonitoringType::Cloud, m, idle,
                                             1000.0, false, &ignored);
  CHECK(cloud == doctest::Approx(1800.0 + 220.0).epsilon(1e-12));
  CHECK_FALSE(ignored);

  // general form retained behind the flag
  const double hw_all =
      cost_monitoring_total(MonitoringType::Hw, m, idle, 1000.0, true, &ignored);
  CHECK(hw_all == doctest::Approx(5500.0 + 220.0).epsilon(1e-12));

  MonitoringCostParams zero;
  CHECK(cost_monitoring_total(MonitoringType::Hw, zero, std::nullopt, 1000.0) == 0.0);
}

TEST_CASE("cost_ml_total: composition of hand-evaluated terms") {
  MlCostParams p;
  p.c_maintenance = 100.0;
  p.train = {0.2, 0.1, 1.2, 1, 0, 10};      // 0.22 kW idle
  p.inference = {0.2, 0.1, 1.2, 1, 0, 10};  // 0.22 kW idle
  CHECK(cost_ml_total(p, 1000.0) == doctest::Approx(100.0 + 440.0).epsilon(1e-12));
  p.c_maintenance = 0.0;
  CHECK(cost_ml_total(p, 1000.0) == doctest::Approx(2 * 0.22 * 1000.0).epsilon(1e-12));
  CHECK(cost_ml_total(p, 0.0) == 0.0);

  p.inference.lambda = 1000;
  p.inference.mu = 1;  // unstable
  CHECK_THROWS_AS(cost_ml_total(p, 1000.0), DataError);
}

TEST_CASE("sweep: slopes, intercept ordering and linearity") {
  const CostConfig cfg = default_cost_config();
  std::vector<double> range;
  for (double x = 5; x <= 100; x += 5) range.push_back(x);
  const auto points = sweep(SweepAxis::MonitoredElements, range, cfg);

  auto series = [&](const std::string& name) {
    std::vector<double> ys;
    for (const auto& p : points)
      if (p.series == name) ys.push_back(p.cost);
    return ys;
  };
  const auto hw = series("hw"), sw = series("sw"), cloud = series("cloud");
  REQUIRE(hw.size() == range.size());

  const double hw_slope = (hw[1] - hw[0]) / (range[1] - range[0]);
  const double sw_slope = (sw[1] - sw[0]) / (range[1] - range[0]);
  const double cloud_slope = (cloud[1] - cloud[0]) / (range[1] - range[0]);
  // hw slope = c_device + maintenance per element; cloud slope = c_endpoint
  CHECK(hw_slope == doctest::Approx(cfg.monitoring.hw.c_device +
                                    cfg.monitoring.hw.c_maintenance));
  CHECK(cloud_slope == doctest::Approx(cfg.monitoring.cloud.c_endpoint));
  CHECK(hw_slope > sw_slope);
  CHECK(sw_slope > cloud_slope);
  // the cloud curve starts lowest
  CHECK(cloud[0] < sw[0]);
  CHECK(cloud[0] < hw[0]);

  // exact linearity: vanishing second differences
  for (const auto& ys : {hw, sw, cloud})
    for (std::size_t i = 2; i < ys.size(); ++i)
      CHECK(std::abs(ys[i] - 2 * ys[i - 1] + ys[i - 2]) < 1e-9 * std::abs(ys[i]) + 1e-9);

  const auto ml_points = sweep(SweepAxis::InferencePods, range, cfg);
  for (const auto& m : cfg.models) {
    std::vector<double> ys;
    for (const auto& p : ml_points)
      if (p.series == m.name) ys.push_back(p.cost);
    REQUIRE(ys.size() == range.size());
    for (std::size_t i = 2; i < ys.size(); ++i)
      CHECK(std::abs(ys[i] - 2 * ys[i - 1] + ys[i - 2]) < 1e-9 * std::abs(ys[i]) + 1e-9);
  }

  CHECK_THROWS_AS(sweep(SweepAxis::MonitoredElements, {}, cfg), ConfigError);
  CHECK_THROWS_AS(sweep(SweepAxis::MonitoredElements, {5, 5}, cfg), ConfigError);
}

TEST_CASE("cost config parsing round-trip of key fields") {
  const std::string text = R"({
    "currency_per_kw": 500,
    "monitoring": {"hw": {"n_device": 3, "c_device": 700, "c_maintenance": 30}},
    "ml": {"c_maintenance": 250},
    "models": [{"name": "gbt", "inference_time_us": 2.5, "training_time_s": 0.4}]
  })";
  const CostConfig cfg = parse_cost_config(text);
  CHECK(cfg.currency_per_kw == 500.0);
  CHECK(cfg.monitoring.hw.c_device == 700.0);
  CHECK(cfg.ml.c_maintenance == 250.0);
  REQUIRE(cfg.models.size() == 1);
  CHECK(cfg.models[0].name == "gbt");
  CHECK_THROWS_AS(parse_cost_config("nope"), ConfigError);
}
