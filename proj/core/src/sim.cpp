#include "topomgr/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "topomgr/provenance.hpp"

namespace topomgr {
namespace sim {

using nlohmann::json;

SimConfig default_config(Scenario scenario) {
  SimConfig cfg;
  cfg.scenario = scenario;
  cfg.iterations = scenario == Scenario::A ? 5000 : 10000;
  return cfg;
}

double rssi_at(const PropagationModel& prop, const Point& ap_pos,
               const Point& ue_pos, Rng& rng) {
  const double d = std::max(prop.d0, euclidean(ap_pos, ue_pos));
  double rssi = prop.tx_power - prop.pl_d0 -
                10.0 * prop.exponent * std::log10(d / prop.d0);
  if (prop.noise_sigma > 0.0) rssi += rng.normal(0.0, prop.noise_sigma);
  return rssi;
}

MobilityState step_mobility(const MobilityState& state, double v_min,
                            double v_max, double dt, const Arena& arena,
                            Rng& rng) {
  MobilityState next = state;
  double dx = 0.0, dy = 0.0, norm = 0.0;
  do {
    dx = rng.uniform(-1.0, 1.0);
    dy = rng.uniform(-1.0, 1.0);
    norm = std::hypot(dx, dy);
  } while (norm < 1e-12);
  next.direction = {dx, dy};
  next.velocity = rng.uniform(v_min, v_max);

  const double step = next.velocity * dt;
  double x = state.position.x + step * dx / norm;
  double y = state.position.y + step * dy / norm;
  // reflect until inside; steps are small relative to the arena
  while (x < 0.0 || x > arena.width) x = x < 0.0 ? -x : 2.0 * arena.width - x;
  while (y < 0.0 || y > arena.height) y = y < 0.0 ? -y : 2.0 * arena.height - y;
  next.position = {x, y};
  return next;
}

LinkMetrics synth_link_metrics(const LinkState& link, double distance,
                               const LinkSynthParams& params, Rng& rng) {
  const double one_way_fixed =
      params.base_delay_ms + params.delay_per_m * distance;
  const double jitter = rng.uniform(-params.jitter_frac, params.jitter_frac);
  const double rtt = 2.0 * link.delay + 2.0 * one_way_fixed * (1.0 + jitter);

  // bursty loss: an idle window shows none of the configured loss
  double loss = link.loss;
  if (loss > 0.0 && rng.uniform() < params.loss_burst_idle_prob) loss = 0.0;

  const double residual =
      loss <= 0.0 ? 0.0 : std::pow(loss, params.residual_loss_exponent);
  const double p = std::max(residual, params.loss_floor);
  const double mathis = params.mathis_k * params.mss_bytes * 8.0 /
                        (rtt / 1000.0 * std::sqrt(p)) / 1e6;

  const double reach = distance / params.capacity_half_dist;
  const double capacity = link.bandwidth / (1.0 + reach * reach) *
                          std::pow(1.0 - loss, params.airtime_exponent);

  const double noise = params.throughput_sigma > 0.0
                           ? std::exp(rng.normal(0.0, params.throughput_sigma))
                           : 1.0;
  const double throughput =
      std::min(link.bandwidth, std::min(capacity, mathis) * noise);
  return {throughput, rtt};
}

int label_scenario_a(const LinkState& link) {
  return static_cast<int>(link.active);
}

int label_scenario_b(bool prev_inside, bool now_inside) {
  if (prev_inside) return now_inside ? 0 : 1;
  return now_inside ? 3 : 2;
}

namespace {

void validate(const SimConfig& cfg) {
  if (cfg.iterations == 0) throw ConfigError("iterations must be > 0");
  if (cfg.step_dt <= 0.0) throw ConfigError("step_dt must be > 0");
  if (cfg.arena.width <= 0.0 || cfg.arena.height <= 0.0)
    throw ConfigError("arena dimensions must be > 0");
  if (cfg.scenario == Scenario::A) {
    const auto& a = cfg.a;
    if (a.baseline.bandwidth <= 0.0 || a.bottleneck_bandwidth <= 0.0)
      throw ConfigError("bandwidth must be > 0");
    if (a.bottleneck_loss < 0.0 || a.bottleneck_loss > 1.0)
      throw ConfigError("loss must be in [0,1]");
    if (a.velocity_min < 0.0 || a.velocity_max < a.velocity_min)
      throw ConfigError("invalid velocity range");
    if (a.episodes.empty()) {
      if (a.gap_min < 1 || a.gap_max < a.gap_min || a.duration_min < 1 ||
          a.duration_max < a.duration_min)
        throw ConfigError("invalid episode schedule bounds");
    }
  } else {
    const auto& b = cfg.b;
    if (b.propagation.d0 <= 0.0) throw ConfigError("d0 must be > 0");
    if (b.propagation.exponent <= 0.0)
      throw ConfigError("path loss exponent must be > 0");
    if (b.velocity_min < 0.0 || b.velocity_max < b.velocity_min)
      throw ConfigError("invalid velocity range");
    if (b.coverage_radius <= 0.0)
      throw ConfigError("coverage_radius must be > 0");
  }
}

std::vector<Episode> make_schedule(const ScenarioAConfig& a,
                                   std::uint64_t iterations, Rng& rng) {
  if (!a.episodes.empty()) {
    std::uint64_t prev_end = 0;
    for (const auto& ep : a.episodes) {
      if (ep.kind == Degradation::None)
        throw ConfigError("episode kind must be a degradation");
      if (ep.end <= ep.start) throw ConfigError("empty episode");
      if (ep.start < prev_end)
        throw ConfigError("overlapping degradation episodes");
      prev_end = ep.end;
    }
    return a.episodes;
  }
  std::vector<Episode> out;
  std::uint64_t t = 0;
  while (true) {
    t += a.gap_min + rng.uniform_int(a.gap_max - a.gap_min + 1);
    if (t >= iterations) break;
    const std::uint64_t dur =
        a.duration_min + rng.uniform_int(a.duration_max - a.duration_min + 1);
    const auto kind = static_cast<Degradation>(1 + rng.uniform_int(3));
    out.push_back({t, std::min(t + dur, iterations), kind});
    t += dur;
  }
  return out;
}

LinkState link_at_step(const ScenarioAConfig& a,
                       const std::vector<Episode>& schedule, std::uint64_t t) {
  LinkState link = a.baseline;
  link.active = Degradation::None;
  for (const auto& ep : schedule) {
    if (t < ep.start || t >= ep.end) continue;
    link.active = ep.kind;
    switch (ep.kind) {
      case Degradation::Bandwidth: link.bandwidth = a.bottleneck_bandwidth; break;
      case Degradation::Loss: link.loss = a.bottleneck_loss; break;
      case Degradation::Delay: link.delay = a.bottleneck_delay; break;
      case Degradation::None: break;
    }
    break;
  }
  return link;
}

data::Dataset run_scenario_a(const SimConfig& cfg) {
  Rng root(cfg.seed);
  Rng schedule_rng = root.child(1);
  Rng mobility_rng = root.child(2);
  Rng metrics_rng = root.child(3);

  const auto schedule = make_schedule(cfg.a, cfg.iterations, schedule_rng);

  data::Dataset ds;
  ds.scenario = Scenario::A;
  ds.feature_names = data::scenario_feature_names(Scenario::A);
  ds.provenance = {sim_config_digest(cfg), cfg.seed};

  MobilityState ue{cfg.ue_start, cfg.a.velocity_min, {0.0, 0.0}};
  for (std::uint64_t t = 0; t < cfg.iterations; ++t) {
    if (t > 0)
      ue = step_mobility(ue, cfg.a.velocity_min, cfg.a.velocity_max,
                         cfg.step_dt, cfg.arena, mobility_rng);
    const LinkState link = link_at_step(cfg.a, schedule, t);
    const double d = euclidean(ue.position, cfg.ap_position);
    const LinkMetrics m = synth_link_metrics(link, d, cfg.a.synth, metrics_rng);
    const double row[] = {ue.position.x, ue.position.y, m.throughput, m.rtt};
    ds.append_row(static_cast<std::int64_t>(t), row, label_scenario_a(link));
  }
  return ds;
}

data::Dataset run_scenario_b(const SimConfig& cfg) {
  Rng root(cfg.seed);
  Rng mobility_rng = root.child(2);
  Rng rssi_rng = root.child(3);

  data::Dataset ds;
  ds.scenario = Scenario::B;
  ds.feature_names = data::scenario_feature_names(Scenario::B);
  ds.provenance = {sim_config_digest(cfg), cfg.seed};

  MobilityState ue{cfg.ue_start,
                   mobility_rng.uniform(cfg.b.velocity_min, cfg.b.velocity_max),
                   {0.0, 0.0}};
  bool prev_inside =
      euclidean(ue.position, cfg.ap_position) <= cfg.b.coverage_radius;
  for (std::uint64_t t = 0; t < cfg.iterations; ++t) {
    if (t > 0)
      ue = step_mobility(ue, cfg.b.velocity_min, cfg.b.velocity_max,
                         cfg.step_dt, cfg.arena, mobility_rng);
    const double d = euclidean(ue.position, cfg.ap_position);
    const double rssi = rssi_at(cfg.b.propagation, cfg.ap_position, ue.position,
                                rssi_rng);
    const bool now_inside = d <= cfg.b.coverage_radius;
    const double row[] = {ue.position.x, ue.position.y, rssi, ue.velocity};
    ds.append_row(static_cast<std::int64_t>(t), row,
                  label_scenario_b(prev_inside, now_inside));
    prev_inside = now_inside;
  }
  return ds;
}

}  // namespace

data::Dataset run_scenario(const SimConfig& config) {
  validate(config);
  return config.scenario == Scenario::A ? run_scenario_a(config)
                                        : run_scenario_b(config);
}

// ---------------------------------------------------------------------------
// Config file I/O

namespace {

json synth_to_json(const LinkSynthParams& p) {
  return json{{"mss_bytes", p.mss_bytes},
              {"mathis_k", p.mathis_k},
              {"loss_floor", p.loss_floor},
              {"base_delay_ms", p.base_delay_ms},
              {"delay_per_m", p.delay_per_m},
              {"jitter_frac", p.jitter_frac},
              {"capacity_half_dist", p.capacity_half_dist},
              {"throughput_sigma", p.throughput_sigma},
              {"airtime_exponent", p.airtime_exponent},
              {"residual_loss_exponent", p.residual_loss_exponent},
              {"loss_burst_idle_prob", p.loss_burst_idle_prob}};
}

void synth_from_json(const json& j, LinkSynthParams& p) {
  p.mss_bytes = j.value("mss_bytes", p.mss_bytes);
  p.mathis_k = j.value("mathis_k", p.mathis_k);
  p.loss_floor = j.value("loss_floor", p.loss_floor);
  p.base_delay_ms = j.value("base_delay_ms", p.base_delay_ms);
  p.delay_per_m = j.value("delay_per_m", p.delay_per_m);
  p.jitter_frac = j.value("jitter_frac", p.jitter_frac);
  p.capacity_half_dist = j.value("capacity_half_dist", p.capacity_half_dist);
  p.throughput_sigma = j.value("throughput_sigma", p.throughput_sigma);
  p.airtime_exponent = j.value("airtime_exponent", p.airtime_exponent);
  p.residual_loss_exponent =
      j.value("residual_loss_exponent", p.residual_loss_exponent);
  p.loss_burst_idle_prob =
      j.value("loss_burst_idle_prob", p.loss_burst_idle_prob);
}

}  // namespace

std::string sim_config_to_json(const SimConfig& cfg) {
  json j;
  j["scenario"] = to_string(cfg.scenario);
  j["iterations"] = cfg.iterations;
  j["seed"] = cfg.seed;
  j["step_dt"] = cfg.step_dt;
  j["arena"] = {{"width", cfg.arena.width}, {"height", cfg.arena.height}};
  j["ap_position"] = {{"x", cfg.ap_position.x}, {"y", cfg.ap_position.y}};
  j["ue_start"] = {{"x", cfg.ue_start.x}, {"y", cfg.ue_start.y}};
  if (cfg.scenario == Scenario::A) {
    json a;
    a["baseline"] = {{"bandwidth", cfg.a.baseline.bandwidth},
                     {"delay", cfg.a.baseline.delay},
                     {"loss", cfg.a.baseline.loss}};
    a["bottleneck"] = {{"bandwidth", cfg.a.bottleneck_bandwidth},
                       {"loss", cfg.a.bottleneck_loss},
                       {"delay", cfg.a.bottleneck_delay}};
    a["velocity_min"] = cfg.a.velocity_min;
    a["velocity_max"] = cfg.a.velocity_max;
    a["gap_min"] = cfg.a.gap_min;
    a["gap_max"] = cfg.a.gap_max;
    a["duration_min"] = cfg.a.duration_min;
    a["duration_max"] = cfg.a.duration_max;
    if (!cfg.a.episodes.empty()) {
      json eps = json::array();
      for (const auto& ep : cfg.a.episodes)
        eps.push_back(json{{"start", ep.start},
                           {"end", ep.end},
                           {"kind", static_cast<int>(ep.kind)}});
      a["episodes"] = eps;
    }
    a["synth"] = synth_to_json(cfg.a.synth);
    j["scenario_a"] = a;
  } else {
    json b;
    b["propagation"] = {{"d0", cfg.b.propagation.d0},
                        {"pl_d0", cfg.b.propagation.pl_d0},
                        {"exponent", cfg.b.propagation.exponent},
                        {"tx_power", cfg.b.propagation.tx_power},
                        {"noise_sigma", cfg.b.propagation.noise_sigma}};
    b["velocity_min"] = cfg.b.velocity_min;
    b["velocity_max"] = cfg.b.velocity_max;
    b["coverage_radius"] = cfg.b.coverage_radius;
    j["scenario_b"] = b;
  }
  return j.dump(2);
}

SimConfig parse_sim_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sim config is not valid JSON: ") + e.what());
  }
  try {
    const Scenario scenario =
        scenario_from_string(j.at("scenario").get<std::string>());
    SimConfig cfg = default_config(scenario);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.step_dt = j.value("step_dt", cfg.step_dt);
    if (j.contains("arena")) {
      cfg.arena.width = j["arena"].value("width", cfg.arena.width);
      cfg.arena.height = j["arena"].value("height", cfg.arena.height);
    }
    if (j.contains("ap_position")) {
      cfg.ap_position.x = j["ap_position"].value("x", cfg.ap_position.x);
      cfg.ap_position.y = j["ap_position"].value("y", cfg.ap_position.y);
    }
    if (j.contains("ue_start")) {
      cfg.ue_start.x = j["ue_start"].value("x", cfg.ue_start.x);
      cfg.ue_start.y = j["ue_start"].value("y", cfg.ue_start.y);
    }
    if (scenario == Scenario::A && j.contains("scenario_a")) {
      const json& a = j["scenario_a"];
      if (a.contains("baseline")) {
        cfg.a.baseline.bandwidth = a["baseline"].value("bandwidth", cfg.a.baseline.bandwidth);
        cfg.a.baseline.delay = a["baseline"].value("delay", cfg.a.baseline.delay);
        cfg.a.baseline.loss = a["baseline"].value("loss", cfg.a.baseline.loss);
      }
      if (a.contains("bottleneck")) {
        cfg.a.bottleneck_bandwidth = a["bottleneck"].value("bandwidth", cfg.a.bottleneck_bandwidth);
        cfg.a.bottleneck_loss = a["bottleneck"].value("loss", cfg.a.bottleneck_loss);
        cfg.a.bottleneck_delay = a["bottleneck"].value("delay", cfg.a.bottleneck_delay);
      }
      cfg.a.velocity_min = a.value("velocity_min", cfg.a.velocity_min);
      cfg.a.velocity_max = a.value("velocity_max", cfg.a.velocity_max);
      cfg.a.gap_min = a.value("gap_min", cfg.a.gap_min);
      cfg.a.gap_max = a.value("gap_max", cfg.a.gap_max);
      cfg.a.duration_min = a.value("duration_min", cfg.a.duration_min);
      cfg.a.duration_max = a.value("duration_max", cfg.a.duration_max);
      for (const auto& je : a.value("episodes", json::array())) {
        Episode ep;
        ep.start = je.at("start").get<std::uint64_t>();
        ep.end = je.at("end").get<std::uint64_t>();
        ep.kind = static_cast<Degradation>(je.at("kind").get<int>());
        if (ep.kind != Degradation::Bandwidth && ep.kind != Degradation::Loss &&
            ep.kind != Degradation::Delay)
          throw ConfigError("episode kind must be 1 (bandwidth), 2 (loss) or 3 (delay)");
        cfg.a.episodes.push_back(ep);
      }
      if (a.contains("synth")) synth_from_json(a["synth"], cfg.a.synth);
    }
    if (scenario == Scenario::B && j.contains("scenario_b")) {
      const json& b = j["scenario_b"];
      if (b.contains("propagation")) {
        const json& p = b["propagation"];
        cfg.b.propagation.d0 = p.value("d0", cfg.b.propagation.d0);
        cfg.b.propagation.pl_d0 = p.value("pl_d0", cfg.b.propagation.pl_d0);
        cfg.b.propagation.exponent = p.value("exponent", cfg.b.propagation.exponent);
        cfg.b.propagation.tx_power = p.value("tx_power", cfg.b.propagation.tx_power);
        cfg.b.propagation.noise_sigma = p.value("noise_sigma", cfg.b.propagation.noise_sigma);
      }
      cfg.b.velocity_min = b.value("velocity_min", cfg.b.velocity_min);
      cfg.b.velocity_max = b.value("velocity_max", cfg.b.velocity_max);
      cfg.b.coverage_radius = b.value("coverage_radius", cfg.b.coverage_radius);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed sim config: ") + e.what());
  }
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sim config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sim_config(ss.str());
}

std::string sim_config_digest(const SimConfig& config) {
  return fnv1a_hex(sim_config_to_json(config));
}

}  // namespace sim
}  // namespace topomgr
