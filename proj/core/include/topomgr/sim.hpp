#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "topomgr/dataset.hpp"
#include "topomgr/rng.hpp"
#include "topomgr/topology.hpp"

namespace topomgr {
namespace sim {

// Log-distance path loss: rssi(d) = tx_power - pl_d0 - 10 n log10(d/d0),
// plus N(0, noise_sigma) shadowing when noise_sigma > 0.
struct PropagationModel {
  double d0 = 1.0;          // reference distance, m
  double pl_d0 = 40.0;      // path loss at d0, dB
  double exponent = 5.0;    // path loss exponent n
  double tx_power = 20.0;   // dBm
  double noise_sigma = 2.0; // shadowing std-dev, dB
};

struct Arena {
  double width = 200.0;   // m
  double height = 200.0;  // m
};

struct MobilityState {
  Point position;
  double velocity = 0.0;  // m/s
  Point direction;        // raw draws, each component in [-1, 1]
};

enum class Degradation { None = 0, Bandwidth = 1, Loss = 2, Delay = 3 };

struct LinkState {
  double bandwidth = 100.0;  // Mbit/s
  double delay = 5.0;        // ms (one-way)
  double loss = 0.0;         // fraction
  Degradation active = Degradation::None;
};

// Constants of the throughput/RTT observation model. The paper of record
// for the emulated testbed measures these with iperf/ping; here they come
// from a generative model whose constants are all config-exposed.
//
// RTT  = 2*link.delay + 2*(base_delay + delay_per_m*d)*(1 + jitter),
//        jitter ~ U(-jitter_frac, +jitter_frac) on the non-link part, so
//        rtt >= 2*link.delay always holds.
// Tput = min(bandwidth, base * exp(N(0, sigma))) with
//        base = min(capacity, mathis),
//        capacity = bandwidth / (1 + (d/capacity_half_dist)^2)
//                   * (1-loss)^airtime_exponent,
//        mathis   = K * MSS / (rtt * sqrt(max(p, loss_floor))),
//        p        = loss^residual_loss_exponent.
// Link-layer retransmission hides most raw loss from TCP: only the
// residual p reaches the Mathis bound, while the retransmissions burn
// airtime (the (1-loss)^a factor). Loss is bursty on top of that: with
// probability loss_burst_idle_prob a measurement window of a lossy link
// sees no bursts at all and reads like a clean one. Those windows are
// what makes LOSS hard to tell from no-change.
struct LinkSynthParams {
  double mss_bytes = 1460.0;
  double mathis_k = 1.224744871391589;  // sqrt(3/2)
  double loss_floor = 1e-4;
  double base_delay_ms = 1.0;
  double delay_per_m = 0.01;  // ms of one-way delay per metre of UE-AP distance
  double jitter_frac = 0.05;
  double capacity_half_dist = 200.0;  // m
  double throughput_sigma = 0.3;      // lognormal spread
  double airtime_exponent = 1.0;
  double residual_loss_exponent = 16.0;
  double loss_burst_idle_prob = 0.4;
};

struct LinkMetrics {
  double throughput = 0.0;  // Mbit/s
  double rtt = 0.0;         // ms
};

// One degradation episode; [start, end) in iteration steps.
struct Episode {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  Degradation kind = Degradation::Bandwidth;
};

struct ScenarioAConfig {
  LinkState baseline{100.0, 5.0, 0.0, Degradation::None};
  double bottleneck_bandwidth = 0.1;  // Mbit/s
  double bottleneck_loss = 0.6;       // fraction
  double bottleneck_delay = 100.0;    // ms
  double velocity_min = 1.0;          // m/s
  double velocity_max = 1.0;
  // Seeded random schedule unless explicit episodes are given.
  std::uint64_t gap_min = 20, gap_max = 60;
  std::uint64_t duration_min = 15, duration_max = 45;
  std::vector<Episode> episodes;  // optional explicit schedule
  LinkSynthParams synth;
};

struct ScenarioBConfig {
  PropagationModel propagation;
  double velocity_min = 1.0;  // m/s
  double velocity_max = 5.0;
  double coverage_radius = 100.0;  // m
};

struct SimConfig {
  Scenario scenario = Scenario::A;
  std::uint64_t iterations = 5000;  // one sample per iteration
  std::uint64_t seed = 1;
  double step_dt = 1.0;  // s
  Arena arena;
  Point ap_position{100.0, 100.0};
  Point ue_start{100.0, 100.0};
  ScenarioAConfig a;
  ScenarioBConfig b;
};

SimConfig default_config(Scenario scenario);
SimConfig parse_sim_config(const std::string& json_text);
SimConfig load_sim_config(const std::string& path);
std::string sim_config_to_json(const SimConfig& config);
// FNV-1a of the canonical config JSON; recorded in dataset provenance.
std::string sim_config_digest(const SimConfig& config);

// d is clamped to d0 below the reference distance.
double rssi_at(const PropagationModel& prop, const Point& ap_pos,
               const Point& ue_pos, Rng& rng);

// Redraws direction components uniform(-1,1) (rejecting the zero vector),
// redraws velocity uniform(v_min,v_max), moves velocity*dt along the
// normalized direction and reflects at the arena bounds.
MobilityState step_mobility(const MobilityState& state, double v_min,
                            double v_max, double dt, const Arena& arena,
                            Rng& rng);

LinkMetrics synth_link_metrics(const LinkState& link, double distance,
                               const LinkSynthParams& params, Rng& rng);

int label_scenario_a(const LinkState& link);
int label_scenario_b(bool prev_inside, bool now_inside);

// Deterministic: identical config (including seed) gives a bit-identical
// dataset. Throws ConfigError on an invalid config or overlapping
// episode schedule.
data::Dataset run_scenario(const SimConfig& config);

}  // namespace sim
}  // namespace topomgr
