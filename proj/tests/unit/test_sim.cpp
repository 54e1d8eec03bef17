#include <doctest.h>

#include <cmath>

#include "topomgr/sim.hpp"

using namespace topomgr;
using namespace topomgr::sim;

TEST_CASE("rssi_at: closed-form values at zero noise") {
  PropagationModel prop;
  prop.d0 = 1.0;
  prop.pl_d0 = 40.0;
  prop.exponent = 5.0;
  prop.tx_power = 20.0;
  prop.noise_sigma = 0.0;
  Rng rng(7);
  const double ref = prop.tx_power - prop.pl_d0;

  CHECK(rssi_at(prop, {0, 0}, {1, 0}, rng) == doctest::Approx(ref).epsilon(1e-12));
  // 10 * 5 * log10(2) = 15.0514997832...
  CHECK(rssi_at(prop, {0, 0}, {2, 0}, rng) ==
        doctest::Approx(ref - 15.05149978319906).epsilon(1e-12));
  CHECK(rssi_at(prop, {0, 0}, {10, 0}, rng) ==
        doctest::Approx(ref - 50.0).epsilon(1e-12));
  // below the reference distance, d clamps to d0
  CHECK(rssi_at(prop, {0, 0}, {0.25, 0}, rng) == doctest::Approx(ref));
}

TEST_CASE("rssi_at: non-increasing in distance at zero noise") {
  PropagationModel prop;
  prop.noise_sigma = 0.0;
  Rng rng(11);
  double prev = 1e9;
  for (double d = 0.5; d < 300.0; d += 3.7) {
    const double v = rssi_at(prop, {0, 0}, {d, 0}, rng);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("step_mobility: unit speed moves exactly 1 m per 1 s step") {
  Arena arena{200, 200};
  Rng rng(3);
  MobilityState s{{100, 100}, 1.0, {0, 0}};
  for (int i = 0; i < 50; ++i) {
    const MobilityState next = step_mobility(s, 1.0, 1.0, 1.0, arena, rng);
    CHECK(next.direction.x >= -1.0);
    CHECK(next.direction.x <= 1.0);
    CHECK(next.direction.y >= -1.0);
    CHECK(next.direction.y <= 1.0);
    const double dx = next.position.x - s.position.x;
    const double dy = next.position.y - s.position.y;
    // reflection only triggers at the walls; start far away from them
    if (s.position.x > 10 && s.position.x < 190 && s.position.y > 10 &&
        s.position.y < 190)
      CHECK(std::hypot(dx, dy) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(next.position.x >= 0.0);
    CHECK(next.position.x <= arena.width);
    CHECK(next.position.y >= 0.0);
    CHECK(next.position.y <= arena.height);
    s = next;
  }
}

TEST_CASE("step_mobility: deterministic under a fixed seed") {
  Arena arena{200, 200};
  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    MobilityState s{{100, 100}, 0, {0, 0}};
    std::vector<Point> traj;
    for (int i = 0; i < 1000; ++i) {
      s = step_mobility(s, 1.0, 5.0, 1.0, arena, rng);
      traj.push_back(s.position);
    }
    return traj;
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}

TEST_CASE("synth_link_metrics: caps, floors and the unconstrained path") {
  LinkSynthParams p;
  SUBCASE("bandwidth bottleneck binds") {
    LinkState link{0.1, 5.0, 0.0, Degradation::Bandwidth};
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      const LinkMetrics m = synth_link_metrics(link, 30.0, p, rng);
      CHECK(m.throughput > 0.0);
      CHECK(m.throughput <= 0.1);
    }
  }
  SUBCASE("loss 0, delay 0, jitter and noise off, d 0: throughput equals bandwidth") {
    p.jitter_frac = 0.0;
    p.throughput_sigma = 0.0;
    LinkState link{100.0, 0.0, 0.0, Degradation::None};
    Rng rng(5);
    const LinkMetrics m = synth_link_metrics(link, 0.0, p, rng);
    CHECK(m.throughput == doctest::Approx(100.0).epsilon(1e-12));
  }
  SUBCASE("delay 100 ms gives rtt >= 200 ms") {
    LinkState link{100.0, 100.0, 0.0, Degradation::Delay};
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      const LinkMetrics m = synth_link_metrics(link, 50.0, p, rng);
      CHECK(m.rtt >= 200.0);
    }
  }
  SUBCASE("posts hold for random link states") {
    Rng gen(17);
    Rng rng(18);
    for (int i = 0; i < 500; ++i) {
      LinkState link;
      link.bandwidth = gen.uniform(0.05, 200.0);
      link.delay = gen.uniform(0.0, 150.0);
      link.loss = gen.uniform(0.0, 1.0);
      const double d = gen.uniform(0.0, 300.0);
      const LinkMetrics m = synth_link_metrics(link, d, p, rng);
      CHECK(m.throughput > 0.0);
      CHECK(m.throughput <= link.bandwidth);
      CHECK(m.rtt >= 2.0 * link.delay);
    }
  }
}

TEST_CASE("label_scenario_a maps the active degradation") {
  LinkState link;
  CHECK(label_scenario_a(link) == 0);
  link.active = Degradation::Bandwidth;
  CHECK(label_scenario_a(link) == 1);
  link.active = Degradation::Loss;
  CHECK(label_scenario_a(link) == 2);
  link.active = Degradation::Delay;
  CHECK(label_scenario_a(link) == 3);
}

TEST_CASE("label_scenario_b covers the four transitions") {
  CHECK(label_scenario_b(true, true) == 0);
  CHECK(label_scenario_b(true, false) == 1);
  CHECK(label_scenario_b(false, false) == 2);
  CHECK(label_scenario_b(false, true) == 3);
}

TEST_CASE("run_scenario A: row count, schema and first-row label") {
  SimConfig cfg = default_config(Scenario::A);
  cfg.iterations = 500;
  cfg.seed = 9;
  const data::Dataset ds = run_scenario(cfg);
  CHECK(ds.n_rows() == 500);
  CHECK(ds.feature_names ==
        std::vector<std::string>{"x_m", "y_m", "throughput_mbps", "rtt_ms"});
  CHECK(ds.labels.front() == 0);
  bool any_change = false;
  for (int l : ds.labels) {
    CHECK(data::is_valid_label(l));
    if (l != 0) any_change = true;
  }
  CHECK(any_change);
}

TEST_CASE("run_scenario B: schema and label walk") {
  SimConfig cfg = default_config(Scenario::B);
  cfg.iterations = 2000;
  cfg.seed = 4;
  const data::Dataset ds = run_scenario(cfg);
  CHECK(ds.n_rows() == 2000);
  CHECK(ds.feature_names ==
        std::vector<std::string>{"x_m", "y_m", "rssi_dbm", "velocity_mps"});
  CHECK(ds.labels.front() == 0);
  for (std::size_t i = 1; i < ds.n_rows(); ++i) {
    const int prev = ds.labels[i - 1], cur = ds.labels[i];
    // 1 follows 0/3; 2 follows 1/2; 3 follows 1/2; 0 follows 0/3
    switch (cur) {
      case 0: CHECK((prev == 0 || prev == 3)); break;
      case 1: CHECK((prev == 0 || prev == 3)); break;
      case 2: CHECK((prev == 1 || prev == 2)); break;
      case 3: CHECK((prev == 1 || prev == 2)); break;
    }
  }
}

TEST_CASE("run_scenario: degenerate single iteration") {
  SimConfig cfg = default_config(Scenario::B);
  cfg.iterations = 1;
  const data::Dataset ds = run_scenario(cfg);
  CHECK(ds.n_rows() == 1);
  CHECK(ds.labels.front() == 0);
}

TEST_CASE("run_scenario: bit-identical for identical config") {
  SimConfig cfg = default_config(Scenario::A);
  cfg.iterations = 800;
  cfg.seed = 21;
  CHECK(run_scenario(cfg) == run_scenario(cfg));
  SimConfig other = cfg;
  other.seed = 22;
  CHECK(run_scenario(cfg) != run_scenario(other));
}

TEST_CASE("run_scenario: overlapping explicit episodes rejected") {
  SimConfig cfg = default_config(Scenario::A);
  cfg.a.episodes = {{10, 50, Degradation::Bandwidth},
                    {40, 80, Degradation::Loss}};
  CHECK_THROWS_AS(run_scenario(cfg), ConfigError);
}

TEST_CASE("coverage by distance agrees with coverage by rssi threshold") {
  PropagationModel prop;
  prop.noise_sigma = 0.0;
  const double radius = 100.0;
  Rng rng(1);
  const double threshold = rssi_at(prop, {0, 0}, {radius, 0}, rng);
  Rng gen(2);
  for (int i = 0; i < 500; ++i) {
    const Point ue{gen.uniform(-150.0, 150.0), gen.uniform(-150.0, 150.0)};
    const bool by_distance = euclidean({0, 0}, ue) <= radius;
    const bool by_rssi = rssi_at(prop, {0, 0}, ue, rng) >= threshold;
    CHECK(by_distance == by_rssi);
  }
}

TEST_CASE("sim config round-trips through JSON") {
  SimConfig cfg = default_config(Scenario::B);
  cfg.seed = 77;
  cfg.b.coverage_radius = 80.0;
  const SimConfig parsed = parse_sim_config(sim_config_to_json(cfg));
  CHECK(parsed.seed == 77);
  CHECK(parsed.b.coverage_radius == 80.0);
  CHECK(sim_config_digest(parsed) == sim_config_digest(cfg));
  CHECK_THROWS_AS(parse_sim_config("{"), ConfigError);
}
