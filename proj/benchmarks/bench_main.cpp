#include <benchmark/benchmark.h>

#include "topomgr/models.hpp"
#include "topomgr/pipeline.hpp"
#include "topomgr/rng.hpp"
#include "topomgr/sim.hpp"

namespace {

using namespace topomgr;

data::Dataset bench_dataset(Scenario scenario, std::uint64_t n) {
  sim::SimConfig cfg = sim::default_config(scenario);
  cfg.iterations = n;
  cfg.seed = 1234;
  return sim::run_scenario(cfg);
}

void bm_rssi_at(benchmark::State& state) {
  sim::PropagationModel prop;
  Rng rng(1);
  double d = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::rssi_at(prop, {0, 0}, {d, d}, rng));
    d = d < 200.0 ? d + 0.1 : 1.0;
  }
}
BENCHMARK(bm_rssi_at);

void bm_step_mobility(benchmark::State& state) {
  sim::Arena arena{200, 200};
  sim::MobilityState s{{100, 100}, 1.0, {0, 0}};
  Rng rng(2);
  for (auto _ : state) {
    s = sim::step_mobility(s, 1.0, 5.0, 1.0, arena, rng);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(bm_step_mobility);

void bm_synth_link_metrics(benchmark::State& state) {
  sim::LinkState link{100.0, 5.0, 0.0, sim::Degradation::None};
  sim::LinkSynthParams params;
  Rng rng(3);
  for (auto _ : state)
    benchmark::DoNotOptimize(sim::synth_link_metrics(link, 75.0, params, rng));
}
BENCHMARK(bm_synth_link_metrics);

void bm_predict(benchmark::State& state, ml::ModelKind kind) {
  static data::Dataset ds = bench_dataset(Scenario::A, 2000);
  const ml::TrainedModel model =
      ml::train(kind, ds, ml::HyperConfig::defaults(kind, Scenario::A), 7);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict(ds.row(i)));
    i = (i + 1) % ds.n_rows();
  }
}
BENCHMARK_CAPTURE(bm_predict, mlp, ml::ModelKind::Mlp);
BENCHMARK_CAPTURE(bm_predict, forest, ml::ModelKind::Forest);
BENCHMARK_CAPTURE(bm_predict, gbt, ml::ModelKind::Gbt);

void bm_vote(benchmark::State& state) {
  static data::Dataset ds = bench_dataset(Scenario::A, 2000);
  pipeline::TopN top;
  for (ml::ModelKind kind :
       {ml::ModelKind::Mlp, ml::ModelKind::Forest, ml::ModelKind::Gbt}) {
    pipeline::RankedModel rm;
    rm.model = ml::train(kind, ds, ml::HyperConfig::defaults(kind, Scenario::A), 7);
    rm.report.model_id = ml::to_string(kind);
    top.entries.push_back(std::move(rm));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pipeline::vote(top, ds.row(i)));
    i = (i + 1) % ds.n_rows();
  }
}
BENCHMARK(bm_vote);

void bm_run_scenario_b(benchmark::State& state) {
  sim::SimConfig cfg = sim::default_config(Scenario::B);
  cfg.iterations = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_scenario(cfg));
}
BENCHMARK(bm_run_scenario_b)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
